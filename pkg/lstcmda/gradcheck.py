"""Central finite-difference verification of analytic gradients."""

from typing import Any, Callable, Collection, Dict, Mapping, Tuple

import attr
import numpy as np
from returns.result import Result
from typing_extensions import Final, final

from lstcmda.config import config_from_mapping
from lstcmda.lstc import (
    VARIANTS,
    LongKernelSpec,
    init_lstc_params,
    lstc_forward,
)
from lstcmda.primitives.exceptions import ConfigurationError
from lstcmda.tensor import Tensor, backward, global_pool_mean, kl_loss

#: Default finite-difference step.
STEP: Final = 1e-5
#: Default relative tolerance.
RTOL: Final = 1e-4
#: Default absolute tolerance.
ATOL: Final = 1e-7

_AXIS_LIMITS: Final = {'frames': 16}

LossFunction = Callable[[], Tensor]


@final
@attr.s(frozen=True, slots=True, auto_attribs=True)
class ParameterCheck(object):
    """Agreement of one named parameter tensor."""

    name: str
    size: int
    max_relative_error: float
    worst_index: Tuple[int, ...]
    passed: bool


@final
@attr.s(frozen=True, slots=True, auto_attribs=True)
class GradcheckReport(object):
    """Per-parameter agreement table."""

    checks: Tuple[ParameterCheck, ...]
    rtol: float

    @property
    def passed(self) -> bool:
        """All parameters agree within tolerance."""
        return all(check.passed for check in self.checks)

    @property
    def worst(self) -> ParameterCheck:
        """The parameter with the largest relative error."""
        return max(self.checks, key=lambda check: check.max_relative_error)

    def format_table(self) -> str:
        """Human readable table, one parameter per row."""
        rows = ['{0:<24} {1:>8} {2:>14} {3}'.format(
            'parameter', 'size', 'max rel err', 'status',
        )]
        for check in self.checks:
            rows.append('{0:<24} {1:>8} {2:>14.3e} {3}'.format(
                check.name,
                check.size,
                check.max_relative_error,
                'ok' if check.passed else 'FAIL',
            ))
        return '\n'.join(rows)


def relative_error(
    analytic: np.ndarray,
    numeric: np.ndarray,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> np.ndarray:
    """
    Elementwise error scaled so that ``<= rtol`` means agreement.

    Values agree when ``|a - n| <= max(rtol * max(|a|, |n|), atol)``.

    .. code:: python

      >>> import numpy as np
      >>> errors = relative_error(np.array([1.0, 0.0]), np.array([1.0, 1e-9]))
      >>> assert errors.max() <= 1e-4

    """
    scale = np.maximum(
        np.maximum(np.abs(analytic), np.abs(numeric)), atol / rtol,
    )
    return np.abs(analytic - numeric) / scale


def numeric_gradient(
    loss_function: LossFunction,
    tensor: Tensor,
    step: float = STEP,
) -> np.ndarray:
    """Central differences of the loss for every element of ``tensor``."""
    tensor.data = np.ascontiguousarray(tensor.data)
    gradient = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    flat_gradient = gradient.reshape(-1)
    for index in range(flat.size):
        original = flat[index]
        flat[index] = original + step
        upper = loss_function().item()
        flat[index] = original - step
        lower = loss_function().item()
        flat[index] = original
        flat_gradient[index] = (upper - lower) / (2 * step)
    return gradient


def analytic_gradients(
    loss_function: LossFunction,
    parameters: Mapping[str, Tensor],
) -> Dict[str, np.ndarray]:
    """Gradients from one backward pass, zeros for unreachable tensors."""
    for tensor in parameters.values():
        tensor.zero_grad()
    backward(loss_function())
    return {
        name: (
            np.zeros_like(tensor.data) if tensor.grad is None
            else tensor.grad.copy()
        )
        for name, tensor in parameters.items()
    }


def gradcheck(
    loss_function: LossFunction,
    parameters: Mapping[str, Tensor],
    *,
    step: float = STEP,
    rtol: float = RTOL,
    atol: float = ATOL,
    flip_sign: Collection[str] = (),
) -> GradcheckReport:
    """
    Compares analytic and numeric gradients of every named parameter.

    ``flip_sign`` negates the analytic gradient of the named parameters,
    which lets callers confirm that a broken gradient is detected.

    .. code:: python

      >>> from lstcmda.tensor import Tensor, mul, total
      >>> x = Tensor([0.5, -1.5], requires_grad=True)
      >>> report = gradcheck(lambda: total(mul(x, x)), {'x': x})
      >>> assert report.passed

    """
    analytic = analytic_gradients(loss_function, parameters)
    checks = []
    for name, tensor in parameters.items():
        expected = -analytic[name] if name in flip_sign else analytic[name]
        numeric = numeric_gradient(loss_function, tensor, step)
        errors = relative_error(expected, numeric, rtol, atol)
        worst = np.unravel_index(int(np.argmax(errors)), errors.shape)
        max_error = float(errors.max()) if errors.size else 0.0
        checks.append(ParameterCheck(
            name=name,
            size=int(tensor.data.size),
            max_relative_error=max_error,
            worst_index=tuple(int(axis) for axis in worst),
            passed=max_error <= rtol,
        ))
    return GradcheckReport(checks=tuple(checks), rtol=rtol)


def _small(instance: object, attribute: Any, value: int) -> None:
    if not 1 <= value <= _AXIS_LIMITS.get(attribute.name, 8):
        raise ConfigurationError('{0} must lie in [1, {1}]'.format(
            attribute.name, _AXIS_LIMITS.get(attribute.name, 8),
        ))


@final
@attr.s(frozen=True, slots=True, auto_attribs=True)
class GradcheckConfig(object):
    """
    A tiny stack of LSTC layers, small enough for finite differences.

    Channels and joints are capped at 8, frames at 16.
    """

    channels: int = attr.ib(default=3, validator=_small)
    frames: int = attr.ib(default=16, validator=_small)
    joints: int = attr.ib(default=4, validator=_small)
    layers: int = attr.ib(default=3, validator=_small)
    variant: str = 'first3_last3'
    mu_std: float = 0.5
    seed: int = 0
    step: float = STEP
    rtol: float = RTOL
    atol: float = ATOL

    def __attrs_post_init__(self) -> None:
        """Every layer halves an even temporal length."""
        if self.variant not in VARIANTS:
            raise ConfigurationError('unknown variant {0!r}'.format(
                self.variant,
            ))
        if self.channels < 2:
            raise ConfigurationError('need two channels for the loss')
        if self.frames % (2 ** self.layers):
            raise ConfigurationError(
                'frames must be divisible by 2 ** layers',
            )

    @classmethod
    def from_mapping(
        cls,
        mapping: Mapping[str, Any],
    ) -> Result['GradcheckConfig', ConfigurationError]:
        """Builds the config from a ``[gradcheck]`` section."""
        return config_from_mapping(cls, mapping)


def lstc_stack_problem(
    config: GradcheckConfig,
) -> Tuple[LossFunction, Dict[str, Tensor]]:
    """
    Loss and named parameters of a random LSTC stack.

    Features go through ``config.layers`` layers, are pooled per channel
    and scored with the KL loss against a random target distribution.

    .. code:: python

      >>> loss_function, params = lstc_stack_problem(GradcheckConfig())
      >>> sorted(params)[:2]
      ['layer0.P_l.W', 'layer0.P_l.b']
      >>> loss_function().shape
      ()

    """
    rng = np.random.default_rng(config.seed)
    features = Tensor(
        rng.normal(size=(config.channels, config.frames, config.joints)),
    )
    target = rng.random(config.channels) + 0.1
    target /= target.sum()

    stack = []
    params: Dict[str, Tensor] = {}
    frames = config.frames
    for layer in range(config.layers):
        spec = LongKernelSpec.build(config.variant, frames // 2)
        layer_params = init_lstc_params(
            config.channels,
            config.channels,
            config.joints,
            spec,
            rng,
            mu_std=config.mu_std,
        )
        stack.append((layer_params, spec))
        for name, tensor in layer_params.named().items():
            params['layer{0}.{1}'.format(layer, name)] = tensor
        frames //= 2

    def loss_function() -> Tensor:
        hidden = features
        for layer_params, spec in stack:
            hidden = lstc_forward(hidden, layer_params, spec)
        return kl_loss(global_pool_mean(hidden), target)

    return loss_function, params
