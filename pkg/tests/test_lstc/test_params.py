import numpy as np
import pytest

from lstcmda.lstc import (
    PARAMETER_NAMES,
    VARIANTS,
    LongKernelSpec,
    LstcParams,
    init_lstc_params,
    learnable_param_count,
    param_breakdown,
)
from lstcmda.primitives.exceptions import ValidationError


def test_default_long_branch_count():
    """Ensures that six taps at ``C = 64`` give ``6 * 64 ** 2`` weights."""
    spec = LongKernelSpec.build('first3_last3', 32)

    assert param_breakdown(64, 64, 64, 25, spec).long == 24576


@pytest.mark.parametrize('frames', [32, 64, 128])
def test_variant_ordering(frames):
    """Ensures that long-branch sizes follow the ablation ordering."""
    counts = {
        variant: param_breakdown(
            64, 64, 64, 25, LongKernelSpec.build(variant, frames // 2),
        ).long
        for variant in VARIANTS
    }

    assert (
        counts['uniform5'] <
        counts['first3_last3'] <
        counts['first4_last4'] <
        counts['every_other']
    )


@pytest.mark.parametrize('variant', VARIANTS)
def test_single_channel_counts_taps(variant):
    """Ensures that one channel pair has one weight per tap."""
    spec = LongKernelSpec.build(variant, 8)

    assert param_breakdown(1, 1, 1, 1, spec).long == spec.taps


@pytest.mark.parametrize('variant', VARIANTS)
def test_count_matches_initialised_tensors(lstcmda, variant):
    """Ensures that the closed form counts every learnable value."""
    spec = LongKernelSpec.build(variant, 8)
    params = init_lstc_params(3, 5, 4, spec, lstcmda.rng(), dim=6)

    actual = sum(tensor.data.size for tensor in params.named().values())

    assert learnable_param_count(3, 5, 6, 16, 4, spec) == actual
    assert params.mu.shape == (6, 8, 4)
    assert params.w_long.shape == (5, 3, spec.taps, 1)


def test_count_needs_matching_frames():
    """Ensures that the spec and the frame count must agree."""
    spec = LongKernelSpec.build('first3_last3', 8)

    with pytest.raises(ValidationError):
        learnable_param_count(3, 3, 3, 32, 4, spec)


def test_mu_defaults_to_zero(lstcmda):
    """Ensures that ``mu`` starts at zero unless asked otherwise."""
    spec = LongKernelSpec.build('first3_last3', 4)

    params = init_lstc_params(2, 2, 3, spec, lstcmda.rng())

    assert not np.any(params.mu.data)
    assert all(tensor.requires_grad for tensor in params.named().values())


def test_named_round_trip(lstcmda):
    """Ensures that parameters restore from their named arrays."""
    spec = LongKernelSpec.build('first3_last3', 4)
    params = init_lstc_params(2, 2, 3, spec, lstcmda.rng(), mu_std=0.1)

    restored = LstcParams.from_named({
        name: tensor.data for name, tensor in params.named().items()
    })

    assert tuple(restored.named()) == PARAMETER_NAMES
    assert np.array_equal(restored.mu.data, params.mu.data)


def test_from_named_needs_every_tensor():
    """Ensures that a missing tensor is reported by name."""
    with pytest.raises(ValidationError, match='mu'):
        LstcParams.from_named({
            name: np.zeros(1) for name in PARAMETER_NAMES if name != 'mu'
        })
