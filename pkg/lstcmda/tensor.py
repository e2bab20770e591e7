"""
Dense float64 tensors with reverse-mode differentiation.

Every differentiable operation is a plain function.
Operations accept optional leading batch axes: ``(..., C, T, V)``.

.. code:: python

  >>> import numpy as np
  >>> from lstcmda.tensor import Tensor, backward, mul, total

  >>> x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
  >>> backward(total(mul(x, x)))
  >>> assert x.grad.tolist() == [2.0, -4.0, 6.0]

"""

import itertools
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from typing_extensions import Final, final

from lstcmda.primitives.exceptions import (
    DimensionError,
    NumericalError,
    UsageError,
    ValidationError,
)

#: Clamp used for the norms inside the cosine similarity.
COSINE_EPS: Final = 1e-8

_GELU_SCALE: Final = float(np.sqrt(2.0 / np.pi))
_GELU_CUBIC: Final = 0.044715

_Gradients = Tuple[Optional[np.ndarray], ...]
_Adjoint = Callable[[np.ndarray], _Gradients]

# Monotonic ids give the exact execution order of recorded operations:
_OPERATION_IDS = itertools.count()


class Tensor(object):
    """
    Dense array of 64-bit floats that can take part in differentiation.

    Leaves created by the user own a copy of the passed data.
    Gradients are accumulated into ``grad`` of leaves
    that have ``requires_grad`` set.
    """

    __slots__ = ('data', 'requires_grad', 'grad', '_origin')

    def __init__(self, data, requires_grad: bool = False) -> None:
        """Creates a new leaf tensor, values must be finite."""
        self.data = _ensure_finite(np.array(data, dtype=np.float64), 'leaf')
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._origin: Optional['_Operation'] = None

    def __repr__(self) -> str:
        """Short description with the shape only."""
        return '<Tensor shape={0} requires_grad={1}>'.format(
            self.shape, self.requires_grad,
        )

    @property
    def shape(self) -> Tuple[int, ...]:
        """Dimension sizes."""
        return tuple(self.data.shape)

    @property
    def is_leaf(self) -> bool:
        """Leaves were created directly, not by an operation."""
        return self._origin is None

    def zero_grad(self) -> None:
        """Drops the accumulated gradient."""
        self.grad = None

    def item(self) -> float:
        """Returns the only value of a scalar tensor."""
        return float(self.data.reshape(-1)[0])

    @classmethod
    def _wrap(cls, array: np.ndarray, requires_grad: bool) -> 'Tensor':
        instance = cls.__new__(cls)
        instance.data = array
        instance.requires_grad = requires_grad
        instance.grad = None
        instance._origin = None
        return instance


@final
class _Operation(object):
    """A single recorded step: inputs, output and the adjoint rule."""

    __slots__ = ('index', 'name', 'inputs', 'output', 'adjoint')

    def __init__(
        self,
        name: str,
        inputs: Tuple[Tensor, ...],
        output: Tensor,
        adjoint: _Adjoint,
    ) -> None:
        self.index = next(_OPERATION_IDS)
        self.name = name
        self.inputs = inputs
        self.output = output
        self.adjoint = adjoint


@final
class GradTape(object):
    """
    Ordered record of the operations that produced a scalar loss.

    The tape is collected from the loss backwards
    and replayed in exact reverse execution order.
    """

    __slots__ = ('_operations',)

    def __init__(self, operations: Sequence[_Operation]) -> None:
        """Stores operations sorted by their execution order."""
        self._operations = tuple(
            sorted(operations, key=lambda operation: operation.index),
        )

    @classmethod
    def from_loss(cls, loss: Tensor) -> 'GradTape':
        """Collects every operation reachable from ``loss``."""
        seen: Dict[int, _Operation] = {}
        pending: List[Tensor] = [loss]
        while pending:
            origin = pending.pop()._origin  # noqa: WPS437
            if origin is None or origin.index in seen:
                continue
            seen[origin.index] = origin
            pending.extend(origin.inputs)
        return cls(list(seen.values()))

    @property
    def names(self) -> Tuple[str, ...]:
        """Operation names in execution order."""
        return tuple(operation.name for operation in self._operations)

    def replay(self, loss: Tensor) -> None:
        """Propagates adjoints from ``loss`` down to the leaves."""
        seed = np.ones_like(loss.data)
        if loss.is_leaf:
            _accumulate(loss, seed)
            return

        adjoints: Dict[int, np.ndarray] = {id(loss): seed}
        for operation in reversed(self._operations):
            upstream = adjoints.pop(id(operation.output), None)
            if upstream is None:
                continue
            gradients = operation.adjoint(upstream)
            for source, gradient in zip(operation.inputs, gradients):
                if gradient is None or not source.requires_grad:
                    continue
                if source.is_leaf:
                    _accumulate(source, gradient)
                elif id(source) in adjoints:
                    adjoints[id(source)] = adjoints[id(source)] + gradient
                else:
                    adjoints[id(source)] = gradient


def backward(loss: Tensor) -> None:
    """
    Computes gradients of a scalar ``loss`` for every reachable leaf.

    Calling it twice without resetting gradients accumulates them.

    .. code:: python

      >>> from lstcmda.tensor import Tensor, backward, total

      >>> x = Tensor([[1.0, 2.0]], requires_grad=True)
      >>> backward(total(x))
      >>> backward(total(x))
      >>> assert x.grad.tolist() == [[2.0, 2.0]]

    """
    if loss.data.size != 1:
        raise UsageError(
            'backward needs a scalar loss, got shape {0}'.format(loss.shape),
        )
    GradTape.from_loss(loss).replay(loss)


# Elementwise and reductions:

def add(left: Tensor, right: Tensor) -> Tensor:
    """Elementwise sum of two tensors of the same shape."""
    _same_shape(left, right, 'add')
    return _record(
        'add',
        left.data + right.data,
        (left, right),
        lambda upstream: (upstream, upstream),
    )


def mul(left: Tensor, right: Tensor) -> Tensor:
    """Elementwise product of two tensors of the same shape."""
    _same_shape(left, right, 'mul')
    return _record(
        'mul',
        left.data * right.data,
        (left, right),
        lambda upstream: (upstream * right.data, upstream * left.data),
    )


def total(tensor: Tensor) -> Tensor:
    """Sum of all values as a scalar tensor."""
    return _record(
        'total',
        np.asarray(tensor.data.sum()),
        (tensor,),
        lambda upstream: (np.full(tensor.shape, float(upstream)),),
    )


def gelu(tensor: Tensor) -> Tensor:
    """Gaussian error linear unit, ``tanh`` approximation."""
    values = tensor.data
    inner = _GELU_SCALE * (values + _GELU_CUBIC * values ** 3)
    tanh = np.tanh(inner)

    def adjoint(upstream: np.ndarray) -> _Gradients:
        derivative = 0.5 * (1.0 + tanh) + 0.5 * values * (
            1.0 - tanh ** 2
        ) * _GELU_SCALE * (1.0 + 3.0 * _GELU_CUBIC * values ** 2)
        return (upstream * derivative,)

    return _record('gelu', 0.5 * values * (1.0 + tanh), (tensor,), adjoint)


def scale_positions(weight: Tensor, features: Tensor) -> Tensor:
    """
    Multiplies ``(..., C, T, V)`` features by a ``(..., 1, T, V)`` weight.

    The single weight of every ``(t, v)`` position is shared by all channels.
    """
    expected = features.shape[:-3] + (1,) + features.shape[-2:]
    if features.data.ndim < 3 or weight.shape != expected:
        raise DimensionError(
            'scale_positions: weight {0} does not match features {1}'.format(
                weight.shape, features.shape,
            ),
        )

    def adjoint(upstream: np.ndarray) -> _Gradients:
        return (
            (upstream * features.data).sum(axis=-3, keepdims=True),
            upstream * weight.data,
        )

    return _record(
        'scale_positions',
        weight.data * features.data,
        (weight, features),
        adjoint,
    )


def expand(tensor: Tensor, leading: Tuple[int, ...]) -> Tensor:
    """Repeats a tensor along new leading batch axes."""
    if not leading:
        return tensor
    axes = tuple(range(len(leading)))
    return _record(
        'expand',
        np.broadcast_to(tensor.data, leading + tensor.shape).copy(),
        (tensor,),
        lambda upstream: (upstream.sum(axis=axes),),
    )


def global_pool_mean(tensor: Tensor) -> Tensor:
    """
    Mean over every ``(t, v)`` position per channel.

    .. code:: python

      >>> from lstcmda.tensor import Tensor, global_pool_mean
      >>> grid = Tensor([[[1.0, 2.0], [3.0, 4.0]]])
      >>> assert global_pool_mean(grid).data.tolist() == [2.5]

    """
    if tensor.data.ndim < 3:
        raise DimensionError('global_pool_mean needs (..., C, T, V) input')
    positions = tensor.shape[-2] * tensor.shape[-1]

    def adjoint(upstream: np.ndarray) -> _Gradients:
        spread = upstream[..., None, None] / positions
        return (np.broadcast_to(spread, tensor.shape).copy(),)

    return _record(
        'global_pool_mean',
        tensor.data.mean(axis=(-2, -1)),
        (tensor,),
        adjoint,
    )


# Linear maps:

def linear_channels(
    tensor: Tensor,
    weight: Tensor,
    bias: Tensor,
) -> Tensor:
    """
    Applies ``W @ x[:, t, v] + b`` at every ``(t, v)`` position.

    .. code:: python

      >>> from lstcmda.tensor import Tensor, linear_channels
      >>> ones = Tensor([[[1.0]], [[1.0]]])
      >>> mapped = linear_channels(
      ...     ones, Tensor([[1.0, 1.0], [2.0, 2.0]]), Tensor([0.0, 1.0]),
      ... )
      >>> assert mapped.data.reshape(-1).tolist() == [2.0, 5.0]

    """
    if tensor.data.ndim < 3:
        raise DimensionError('linear_channels needs (..., C, T, V) input')
    _check_projection(weight, bias, tensor.shape[-3], 'linear_channels')

    def adjoint(upstream: np.ndarray) -> _Gradients:
        return (
            np.einsum('dc,...dtv->...ctv', weight.data, upstream),
            np.einsum(
                'bdtv,bctv->dc', _flat(upstream, 3), _flat(tensor.data, 3),
            ),
            _flat(upstream, 3).sum(axis=(0, 2, 3)),
        )

    return _record(
        'linear_channels',
        np.einsum('dc,...ctv->...dtv', weight.data, tensor.data)
        + bias.data[:, None, None],
        (tensor, weight, bias),
        adjoint,
    )


def linear(tensor: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Applies ``W @ x + b`` to the last axis."""
    _check_projection(weight, bias, tensor.shape[-1], 'linear')

    def adjoint(upstream: np.ndarray) -> _Gradients:
        return (
            upstream @ weight.data,
            _flat(upstream, 1).T @ _flat(tensor.data, 1),
            _flat(upstream, 1).sum(axis=0),
        )

    return _record(
        'linear',
        tensor.data @ weight.data.T + bias.data,
        (tensor, weight, bias),
        adjoint,
    )


# Temporal convolution:

def conv_time(
    tensor: Tensor,
    kernel: Tensor,
    stride: int,
    pad: Tuple[int, int],
) -> Tensor:
    """
    Convolution along the temporal axis, independently for every joint.

    ``kernel`` has shape ``(C_out, C_in, K, 1)``, padding is zero padding.
    Output length is ``(T + left + right - K) // stride + 1``.
    """
    _check_kernel(tensor, kernel, 'conv_time')
    taps = tuple(range(kernel.shape[2]))
    return conv_time_taps(tensor, kernel, taps, len(taps), stride, pad)


def conv_time_taps(  # noqa: WPS211
    tensor: Tensor,
    kernel: Tensor,
    taps: Sequence[int],
    span: int,
    stride: int,
    pad: Tuple[int, int],
) -> Tensor:
    """
    Temporal convolution whose weights sit only at the given tap offsets.

    ``kernel`` has shape ``(C_out, C_in, len(taps), 1)``:
    weight ``k`` is applied at offset ``taps[k]`` inside a window of
    ``span`` frames, every other offset of the window contributes zero.
    """
    _check_kernel(tensor, kernel, 'conv_time_taps')
    if kernel.shape[2] != len(taps):
        raise DimensionError('conv_time_taps: one kernel slot per tap')
    if stride < 1 or min(pad) < 0:
        raise ValidationError('conv_time_taps: bad stride or padding')
    if any(tap < 0 or tap >= span for tap in taps):
        raise ValidationError('conv_time_taps: taps must lie in [0, span)')

    left, right = pad
    frames = tensor.shape[-2]
    padded = _pad_time(tensor.data, left, right)
    if span > padded.shape[-2]:
        raise DimensionError(
            'conv_time_taps: window {0} exceeds padded length {1}'.format(
                span, padded.shape[-2],
            ),
        )
    positions = stride * np.arange((padded.shape[-2] - span) // stride + 1)
    weights = kernel.data[..., 0]

    out_shape = (weights.shape[0], positions.size, tensor.shape[-1])
    output = np.zeros(tensor.shape[:-3] + out_shape)
    for slot, tap in enumerate(taps):
        output += np.einsum(
            'oi,...itv->...otv',
            weights[:, :, slot],
            padded[..., positions + tap, :],
        )

    def adjoint(upstream: np.ndarray) -> _Gradients:
        padded_grad = np.zeros_like(padded)
        kernel_grad = np.zeros_like(weights)
        for slot, tap in enumerate(taps):
            kernel_grad[:, :, slot] = np.einsum(
                'botv,bitv->oi',
                _flat(upstream, 3),
                _flat(padded[..., positions + tap, :], 3),
            )
            padded_grad[..., positions + tap, :] += np.einsum(
                'oi,...otv->...itv', weights[:, :, slot], upstream,
            )
        return (
            padded_grad[..., left:left + frames, :],
            kernel_grad[..., None],
        )

    return _record('conv_time', output, (tensor, kernel), adjoint)


# Similarity and loss:

def cosine_sim_channel(
    left: Tensor,
    right: Tensor,
    eps: float = COSINE_EPS,
) -> Tensor:
    """
    Cosine similarity over the channel axis at every ``(t, v)`` position.

    Norms are clamped from below by ``eps``, so zero vectors give zero.

    .. code:: python

      >>> from lstcmda.tensor import Tensor, cosine_sim_channel
      >>> first = Tensor([[[1.0]], [[0.0]]])
      >>> second = Tensor([[[1.0]], [[1.0]]])
      >>> similarity = cosine_sim_channel(first, second).item()
      >>> assert abs(similarity - 0.5 ** 0.5) < 1e-12

    """
    _same_shape(left, right, 'cosine_sim_channel')
    if left.data.ndim < 3:
        raise DimensionError('cosine_sim_channel needs (..., D, T, V) input')
    if eps <= 0:
        raise ValidationError('cosine_sim_channel: eps must be positive')

    dot = (left.data * right.data).sum(axis=-3, keepdims=True)
    left_norm = np.sqrt((left.data ** 2).sum(axis=-3, keepdims=True))
    right_norm = np.sqrt((right.data ** 2).sum(axis=-3, keepdims=True))
    left_clamped = np.maximum(left_norm, eps)
    right_clamped = np.maximum(right_norm, eps)
    denominator = left_clamped * right_clamped

    def adjoint(upstream: np.ndarray) -> _Gradients:
        ratio = dot / denominator
        left_unit = _unit_or_zero(left.data, left_norm, eps)
        right_unit = _unit_or_zero(right.data, right_norm, eps)
        return (
            upstream * (
                right.data / denominator - ratio / left_clamped * left_unit
            ),
            upstream * (
                left.data / denominator - ratio / right_clamped * right_unit
            ),
        )

    return _record(
        'cosine_sim_channel', dot / denominator, (left, right), adjoint,
    )


def kl_loss(logits: Tensor, target) -> Tensor:
    """
    Mean over rows of ``KL(target || softmax(logits))``.

    Terms with a zero target probability contribute zero.

    .. code:: python

      >>> import math
      >>> from lstcmda.tensor import Tensor, kl_loss
      >>> loss = kl_loss(Tensor([[0.0, 0.0]]), [[1.0, 0.0]]).item()
      >>> assert abs(loss - math.log(2.0)) < 1e-12

    """
    target_values = _validate_target(logits, target)
    values = logits.data.reshape(-1, logits.shape[-1])
    rows = target_values.reshape(values.shape)
    shifted = values - values.max(axis=-1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    positive = rows > 0
    safe_rows = np.where(positive, rows, 1.0)
    terms = np.where(positive, rows * (np.log(safe_rows) - log_probs), 0.0)
    count = values.shape[0]

    def adjoint(upstream: np.ndarray) -> _Gradients:
        probs = np.exp(log_probs)
        gradient = probs * rows.sum(axis=-1, keepdims=True) - rows
        return ((float(upstream) / count * gradient).reshape(logits.shape),)

    return _record(
        'kl_loss', np.asarray(terms.sum() / count), (logits,), adjoint,
    )


# Helpers:

def _record(
    name: str,
    value: np.ndarray,
    inputs: Tuple[Tensor, ...],
    adjoint: _Adjoint,
) -> Tensor:
    _ensure_finite(value, name)
    requires_grad = any(source.requires_grad for source in inputs)
    output = Tensor._wrap(value, requires_grad)  # noqa: WPS437
    if requires_grad:
        output._origin = _Operation(  # noqa: WPS437
            name, inputs, output, adjoint,
        )
    return output


def _accumulate(leaf: Tensor, gradient: np.ndarray) -> None:
    gradient = np.asarray(gradient, dtype=np.float64).reshape(leaf.shape)
    if leaf.grad is None:
        leaf.grad = gradient.copy()
    else:
        leaf.grad = leaf.grad + gradient


def _ensure_finite(array: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(array)):
        raise NumericalError('{0} produced non-finite values'.format(name))
    return array


def _same_shape(left: Tensor, right: Tensor, name: str) -> None:
    if left.shape != right.shape:
        raise DimensionError('{0}: shapes {1} and {2} differ'.format(
            name, left.shape, right.shape,
        ))


def _check_projection(
    weight: Tensor,
    bias: Tensor,
    channels: int,
    name: str,
) -> None:
    if weight.data.ndim != 2 or weight.shape[1] != channels:
        raise DimensionError('{0}: weight {1} cannot map {2} channels'.format(
            name, weight.shape, channels,
        ))
    if bias.shape != (weight.shape[0],):
        raise DimensionError('{0}: bias {1} does not match weight {2}'.format(
            name, bias.shape, weight.shape,
        ))


def _check_kernel(tensor: Tensor, kernel: Tensor, name: str) -> None:
    if tensor.data.ndim < 3:
        raise DimensionError('{0} needs (..., C, T, V) input'.format(name))
    if kernel.data.ndim != 4 or kernel.shape[3] != 1:
        raise DimensionError('{0}: kernel must be (C_out, C_in, K, 1)'.format(
            name,
        ))
    if kernel.shape[1] != tensor.shape[-3]:
        raise DimensionError('{0}: kernel takes {1} channels, got {2}'.format(
            name, kernel.shape[1], tensor.shape[-3],
        ))


def _pad_time(values: np.ndarray, left: int, right: int) -> np.ndarray:
    widths = [(0, 0)] * (values.ndim - 2) + [(left, right), (0, 0)]
    return np.pad(values, widths, mode='constant')


def _flat(values: np.ndarray, kept: int) -> np.ndarray:
    # Leading batch axes collapse into one, a missing batch becomes size 1:
    return values.reshape((-1,) + values.shape[values.ndim - kept:])


def _unit_or_zero(
    values: np.ndarray,
    norm: np.ndarray,
    eps: float,
) -> np.ndarray:
    # The clamped norm is constant below ``eps``:
    active = norm > eps
    return np.where(active, values / np.where(active, norm, 1.0), 0.0)


def _validate_target(logits: Tensor, target) -> np.ndarray:
    values = target.data if isinstance(target, Tensor) else np.asarray(
        target, dtype=np.float64,
    )
    if values.shape != logits.shape or logits.data.ndim not in {1, 2}:
        raise DimensionError('kl_loss: logits {0} and target {1}'.format(
            logits.shape, values.shape,
        ))
    if logits.shape[-1] < 2:
        raise ValidationError('kl_loss needs at least two classes')
    rows = values.reshape(-1, values.shape[-1])
    if np.any(rows < 0) or np.any(np.abs(rows.sum(axis=-1) - 1.0) > 1e-9):
        raise ValidationError('kl_loss: every target row must sum to one')
    return values

