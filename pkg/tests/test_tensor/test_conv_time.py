import numpy as np
import pytest

from lstcmda.primitives.exceptions import DimensionError
from lstcmda.tensor import Tensor, conv_time, conv_time_taps


def _naive_conv(features, kernel, stride, pad):
    """Triple loop over output channels, positions and joints."""
    padded = np.pad(features, ((0, 0), pad, (0, 0)))
    out_channels, in_channels, taps, _ = kernel.shape
    length = (padded.shape[1] - taps) // stride + 1
    output = np.zeros((out_channels, length, features.shape[2]))
    for out_c in range(out_channels):
        for position in range(length):
            for joint in range(features.shape[2]):
                window = padded[:, position * stride:position * stride + taps]
                output[out_c, position, joint] = np.sum(
                    kernel[out_c, :, :, 0] * window[:, :, joint],
                )
    return output


def test_short_branch_shape():
    """Ensures that the short branch geometry halves 64 frames."""
    features = Tensor(np.ones((2, 64, 25)))
    kernel = Tensor(np.ones((2, 2, 7, 1)))

    assert conv_time(features, kernel, 2, (3, 2)).shape == (2, 32, 25)


def test_single_tap_identity(lstcmda):
    """Ensures that a single identity tap returns the input."""
    features = lstcmda.rng().normal(size=(3, 5, 4))
    kernel = np.zeros((3, 3, 1, 1))
    kernel[np.arange(3), np.arange(3), 0, 0] = 1.0

    output = conv_time(Tensor(features), Tensor(kernel), 1, (0, 0))

    assert lstcmda.is_close(output, features, atol=0.0)


@pytest.mark.parametrize('trial', range(20))
@pytest.mark.parametrize(('stride', 'pad'), [
    (1, (0, 0)),
    (2, (3, 2)),
    (1, (1, 1)),
])
def test_matches_naive_oracle(lstcmda, trial, stride, pad):
    """Ensures that convolution matches a sliding window dot product."""
    rng = lstcmda.rng(trial)
    channels = rng.integers(1, 4)
    features = rng.normal(size=(channels, 8, rng.integers(1, 4)))
    kernel = rng.normal(size=(rng.integers(1, 4), channels, 3, 1))

    output = conv_time(Tensor(features), Tensor(kernel), stride, pad)

    assert lstcmda.is_close(output, _naive_conv(features, kernel, stride, pad))


def test_linearity(lstcmda):
    """Ensures that convolution is linear in its input."""
    rng = lstcmda.rng()
    first, second = rng.normal(size=(2, 3, 8, 4))
    kernel = Tensor(rng.normal(size=(2, 3, 5, 1)))

    combined = conv_time(Tensor(2.0 * first - 0.5 * second), kernel, 2, (2, 2))
    separate = (
        2.0 * conv_time(Tensor(first), kernel, 2, (2, 2)).data -
        0.5 * conv_time(Tensor(second), kernel, 2, (2, 2)).data
    )

    assert lstcmda.is_close(combined, separate, atol=1e-10)


def test_joint_independence(lstcmda):
    """Ensures that permuting joints permutes the output the same way."""
    rng = lstcmda.rng()
    features = rng.normal(size=(2, 8, 5))
    kernel = Tensor(rng.normal(size=(3, 2, 3, 1)))
    permutation = rng.permutation(5)

    permuted = conv_time(Tensor(features[:, :, permutation]), kernel, 1, (1, 1))
    reference = conv_time(Tensor(features), kernel, 1, (1, 1))

    assert lstcmda.is_close(permuted, reference.data[:, :, permutation])


def test_batch_axis_matches_single_samples(lstcmda):
    """Ensures that a leading batch axis does not change per-sample values."""
    rng = lstcmda.rng()
    batch = rng.normal(size=(4, 2, 8, 3))
    kernel = Tensor(rng.normal(size=(2, 2, 7, 1)))

    stacked = conv_time(Tensor(batch), kernel, 2, (3, 2))

    for index, features in enumerate(batch):
        single = conv_time(Tensor(features), kernel, 2, (3, 2))
        assert lstcmda.is_close(stacked.data[index], single)


def test_sparse_taps_equal_dense_kernel_with_zeros(lstcmda):
    """Ensures that tap weights act like a dense kernel with zeros between."""
    rng = lstcmda.rng()
    features = rng.normal(size=(2, 8, 3))
    taps = (0, 2, 5)
    weights = rng.normal(size=(2, 2, 3, 1))
    dense = np.zeros((2, 2, 6, 1))
    dense[:, :, list(taps)] = weights

    sparse = conv_time_taps(
        Tensor(features), Tensor(weights), taps, 6, 1, (1, 1),
    )

    assert lstcmda.is_close(sparse, _naive_conv(features, dense, 1, (1, 1)))


@pytest.mark.parametrize(('features', 'kernel'), [
    ((3, 8, 2), (2, 2, 3, 1)),
    ((2, 8), (2, 2, 3, 1)),
    ((2, 8, 2), (2, 2, 3)),
    ((2, 2, 2), (1, 2, 7, 1)),
])
def test_shape_errors(features, kernel):
    """Ensures that mismatched shapes raise a dimension error."""
    with pytest.raises(DimensionError):
        conv_time(Tensor(np.ones(features)), Tensor(np.ones(kernel)), 1, (0, 0))
