from typing import Callable, Mapping, Optional

import numpy as np
import pytest
from typing_extensions import Final, final

_SIMPLEX_TOLERANCE: Final = 1e-9


@final
class _LstcAsserts(object):
    """Class with helpers assertions to check tensors and samples."""

    __slots__ = ('_seed',)

    def __init__(self, seed: int) -> None:
        self._seed = seed

    def rng(self, offset: int = 0) -> np.random.Generator:
        """A generator that depends on the test session seed only."""
        return np.random.default_rng([self._seed, offset])

    def is_label_simplex(
        self,
        label,
        tolerance: float = _SIMPLEX_TOLERANCE,
    ) -> bool:
        """Ensures that a label is non-negative and sums to one."""
        label = np.asarray(getattr(label, 'y', label), dtype=np.float64)
        return bool(
            np.all(label >= -tolerance) and
            abs(float(label.sum()) - 1.0) <= tolerance,
        )

    def is_close(
        self,
        actual,
        expected,
        atol: float = 1e-12,
        rtol: float = 0.0,
    ) -> bool:
        """Ensures that two arrays have equal shapes and close values."""
        actual = np.asarray(getattr(actual, 'data', actual))
        expected = np.asarray(getattr(expected, 'data', expected))
        return actual.shape == expected.shape and bool(
            np.allclose(actual, expected, atol=atol, rtol=rtol),
        )

    def gradients_match(
        self,
        loss_function: Callable[[], object],
        parameters: Mapping[str, object],
        rtol: Optional[float] = None,
    ) -> bool:
        """Ensures that every analytic gradient survives a gradcheck."""
        from lstcmda.gradcheck import RTOL, gradcheck

        report = gradcheck(
            loss_function,  # type: ignore
            parameters,  # type: ignore
            rtol=RTOL if rtol is None else rtol,
        )
        return report.passed


@pytest.fixture(scope='session')
def _session_seed(request) -> int:
    """
    Seed shared by every generator of one test session.

    ``pytest-randomly`` sets ``randomly_seed`` when it is installed.
    """
    seed = getattr(request.config.option, 'randomly_seed', 0)
    return seed if isinstance(seed, int) else 0


@pytest.fixture(scope='session')
def lstcmda(_session_seed) -> _LstcAsserts:  # noqa: WPS442
    """Returns our own class with helpers assertions to check numbers."""
    return _LstcAsserts(_session_seed)
