import numpy as np
import pytest

from lstcmda.lstc import LongKernelSpec, fuse, fusion_weight, init_lstc_params
from lstcmda.primitives.exceptions import DimensionError
from lstcmda.tensor import COSINE_EPS, Tensor


def _cosine(left, right):
    return left @ right / (
        max(np.linalg.norm(left), COSINE_EPS) *
        max(np.linalg.norm(right), COSINE_EPS)
    )


def _params(rng, channels=3, dim=4, half_t=4, joints=2):
    spec = LongKernelSpec.build('first3_last3', half_t)
    return init_lstc_params(
        channels, channels, joints, spec, rng, dim=dim, mu_std=0.5,
    )


def test_matches_positionwise_oracle(lstcmda):
    """Ensures that fusion equals the scalar formula at every position."""
    rng = lstcmda.rng()
    params = _params(rng)
    short = rng.normal(size=(3, 4, 2))
    long = rng.normal(size=(3, 4, 2))

    output = fuse(Tensor(short), Tensor(long), params).data

    proj_s = params.proj_s_weight.data, params.proj_s_bias.data
    proj_l = params.proj_l_weight.data, params.proj_l_bias.data
    for frame in range(4):
        for joint in range(2):
            aligned_s = proj_s[0] @ short[:, frame, joint] + proj_s[1]
            aligned_l = proj_l[0] @ long[:, frame, joint] + proj_l[1]
            weight = _cosine(aligned_s, aligned_l) + _cosine(
                params.mu.data[:, frame, joint], aligned_l,
            )
            expected = short[:, frame, joint] + weight * long[:, frame, joint]
            assert np.allclose(
                output[:, frame, joint], expected, rtol=0.0, atol=1e-12,
            )


def test_weight_is_bounded(lstcmda):
    """Ensures that the fusion weight stays in ``[-2, 2]``."""
    rng = lstcmda.rng()
    params = _params(rng, half_t=10, joints=10)
    short = Tensor(rng.normal(size=(100, 3, 10, 10)))
    long = Tensor(rng.normal(size=(100, 3, 10, 10)) * 10.0 ** rng.integers(
        -6, 6, size=(100, 1, 10, 10),
    ))

    weight = fusion_weight(short, long, params).data

    assert weight.size == 10 ** 4
    assert np.all(np.abs(weight) <= 2 + 1e-12)


def test_zero_long_features_keep_short(lstcmda):
    """Ensures that a silent long branch leaves the short features alone."""
    rng = lstcmda.rng()
    params = _params(rng)
    short = rng.normal(size=(3, 4, 2))

    output = fuse(Tensor(short), Tensor(np.zeros((3, 4, 2))), params)

    assert np.array_equal(output.data, short)


def test_branch_shapes_must_match(lstcmda):
    """Ensures that branch outputs of different shapes are rejected."""
    params = _params(lstcmda.rng())

    with pytest.raises(DimensionError):
        fusion_weight(
            Tensor(np.ones((3, 4, 2))), Tensor(np.ones((3, 2, 2))), params,
        )


def test_mu_shape_must_match(lstcmda):
    """Ensures that ``mu`` built for another length is rejected."""
    params = _params(lstcmda.rng(), half_t=8)

    with pytest.raises(DimensionError):
        fuse(Tensor(np.ones((3, 4, 2))), Tensor(np.ones((3, 4, 2))), params)
