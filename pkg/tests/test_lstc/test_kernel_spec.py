import pytest

from lstcmda.lstc import VARIANTS, LongKernelSpec
from lstcmda.primitives.exceptions import ValidationError


@pytest.mark.parametrize(('variant', 'half_t', 'taps', 'span'), [
    ('first3_last3', 32, (0, 1, 2, 32, 33, 34), 35),
    ('first3_last3', 8, (0, 1, 2, 8, 9, 10), 11),
    ('first4_last4', 8, (0, 1, 2, 3, 8, 9, 10, 11), 12),
    ('uniform5', 8, (0, 3, 5, 8, 10), 11),
    ('every_other', 8, (0, 2, 4, 6, 8, 10), 11),
])
def test_layouts(variant, half_t, taps, span):
    """Ensures that every variant places its taps as documented."""
    spec = LongKernelSpec.build(variant, half_t)

    assert spec.active_indices == taps
    assert spec.span == span
    assert spec.taps == len(taps)


@pytest.mark.parametrize('variant', VARIANTS)
@pytest.mark.parametrize('half_t', [1, 2, 4, 8, 32])
def test_taps_inside_span(variant, half_t):
    """Ensures that taps lie in the window and the output is ``T/2`` long."""
    spec = LongKernelSpec.build(variant, half_t)
    left, right = spec.pad

    assert all(0 <= tap < spec.span for tap in spec.active_indices)
    assert 2 * half_t + left + right - spec.span + 1 == half_t


def test_uniform5_endpoints():
    """Ensures that the uniform layout covers both ends of the window."""
    spec = LongKernelSpec.build('uniform5', 32)

    assert spec.active_indices[0] == 0
    assert spec.active_indices[-1] == spec.span - 1


@pytest.mark.parametrize(('variant', 'half_t'), [
    ('dense', 8),
    ('first3_last3', 0),
])
def test_rejects_bad_layouts(variant, half_t):
    """Ensures that unknown variants and empty windows are rejected."""
    with pytest.raises(ValidationError):
        LongKernelSpec.build(variant, half_t)
