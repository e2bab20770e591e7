import numpy as np
import pytest

from lstcmda.lstc import LongKernelSpec, init_lstc_params, lstc_forward
from lstcmda.tensor import (
    Tensor,
    backward,
    conv_time_taps,
    linear,
    linear_channels,
    mul,
    total,
)


def _linear_channels(inputs, params):
    return linear_channels(inputs, params['W'], params['b'])


def _linear(inputs, params):
    return linear(inputs, params['W'], params['b'])


def _sparse_conv(inputs, params):
    return conv_time_taps(inputs, params['K'], (0, 2, 5), 6, 2, (3, 2))


_OPS = (
    (_linear_channels, (3, 4, 2), {'W': (2, 3), 'b': (2,)}),
    (_linear, (5, 3), {'W': (4, 3), 'b': (4,)}),
    (_sparse_conv, (2, 8, 3), {'K': (3, 2, 3, 1)}),
)


def _gradients(operation, inputs, params, weights):
    for tensor in (inputs, *params.values()):
        tensor.zero_grad()
    backward(total(mul(operation(inputs, params), Tensor(weights))))
    return inputs.grad.copy(), {
        name: tensor.grad.copy() for name, tensor in params.items()
    }


@pytest.mark.parametrize(('operation', 'sample_shape', 'param_shapes'), _OPS)
@pytest.mark.parametrize('leading', [(4,), (2, 3)])
def test_batched_gradients_sum_single_samples(
    lstcmda, operation, sample_shape, param_shapes, leading,
):
    """Ensures that batch axes sum the per-sample parameter gradients."""
    rng = lstcmda.rng()
    params = {
        name: Tensor(rng.normal(size=shape), requires_grad=True)
        for name, shape in param_shapes.items()
    }
    batch = rng.normal(size=leading + sample_shape)
    output_shape = operation(Tensor(batch), params).shape
    weights = rng.normal(size=output_shape)

    batch_tensor = Tensor(batch, requires_grad=True)
    input_grad, param_grads = _gradients(
        operation, batch_tensor, params, weights,
    )

    flat_batch = batch.reshape((-1,) + sample_shape)
    flat_input_grad = input_grad.reshape(flat_batch.shape)
    flat_weights = weights.reshape((-1,) + output_shape[len(leading):])
    summed = {name: 0.0 for name in params}
    for index, sample in enumerate(flat_batch):
        single = Tensor(sample, requires_grad=True)
        sample_grad, sample_params = _gradients(
            operation, single, params, flat_weights[index],
        )
        assert lstcmda.is_close(
            flat_input_grad[index], sample_grad, atol=1e-10,
        )
        for name, gradient in sample_params.items():
            summed[name] = summed[name] + gradient

    for name, gradient in param_grads.items():
        assert lstcmda.is_close(gradient, summed[name], atol=1e-10)


@pytest.mark.parametrize(('operation', 'sample_shape', 'param_shapes'), _OPS)
def test_batched_ops_gradcheck(
    lstcmda, operation, sample_shape, param_shapes,
):
    """Ensures that batched parameter gradients survive a gradcheck."""
    rng = lstcmda.rng()
    params = {
        name: Tensor(rng.normal(size=shape), requires_grad=True)
        for name, shape in param_shapes.items()
    }
    inputs = Tensor(rng.normal(size=(3,) + sample_shape))

    assert lstcmda.gradients_match(
        lambda: total(operation(inputs, params)), params,
    )


def test_batched_layer_backward(lstcmda):
    """Ensures that a minibatch reaches every parameter of a layer."""
    rng = lstcmda.rng()
    spec = LongKernelSpec.build('first3_last3', 4)
    params = init_lstc_params(2, 3, 5, spec, rng, mu_std=0.1)
    batch = Tensor(rng.normal(size=(3, 2, 8, 5)))
    weights = Tensor(rng.normal(size=(3, 3, 4, 5)))

    assert lstcmda.gradients_match(
        lambda: total(mul(lstc_forward(batch, params, spec), weights)),
        params.named(),
    )
    for tensor in params.named().values():
        assert tensor.grad is not None
        assert tensor.grad.shape == tensor.shape
