"""
Long-short term temporal convolution.

A downsampling layer that halves the temporal axis.
It runs two temporal convolutions in parallel:

- the short branch, a dense ``7x1`` kernel with stride 2
- the long branch, a stride 1 kernel spanning ``T/2 + 3`` frames
  with weights only at a few taps, see :class:`LongKernelSpec`

Both outputs are projected into a shared space,
their cosine similarity plus the similarity of a learnable matrix ``mu``
to the projected long features weighs the long branch:

.. code:: text

  out = F_s + (cos(P_s F_s, P_l F_l) + cos(mu, P_l F_l)) * F_l

"""

import math
from typing import Callable, Dict, Mapping, Optional, Tuple

import attr
import numpy as np
from typing_extensions import Final, Literal, final

from lstcmda.primitives.exceptions import DimensionError, ValidationError
from lstcmda.tensor import (
    Tensor,
    add,
    conv_time,
    conv_time_taps,
    cosine_sim_channel,
    expand,
    linear_channels,
    scale_positions,
)

KernelVariant = Literal[
    'first3_last3', 'first4_last4', 'uniform5', 'every_other',
]

#: Every supported long-kernel layout, the default comes first.
VARIANTS: Final = ('first3_last3', 'first4_last4', 'uniform5', 'every_other')

#: Short branch geometry.
SHORT_TAPS: Final = 7
SHORT_STRIDE: Final = 2
SHORT_PAD: Final = (3, 2)

#: Names of the parameter tensors, also used in checkpoints.
PARAMETER_NAMES: Final = (
    'w_short', 'w_long', 'P_s.W', 'P_s.b', 'P_l.W', 'P_l.b', 'mu',
)


@final
@attr.s(frozen=True, slots=True, auto_attribs=True)
class LongKernelSpec(object):
    """
    Where the long branch keeps learnable weights.

    ``active_indices`` are tap offsets inside a window of ``span`` frames.

    .. code:: python

      >>> spec = LongKernelSpec.build('first3_last3', half_t=32)
      >>> spec.active_indices
      (0, 1, 2, 32, 33, 34)
      >>> spec.span, spec.pad
      (35, (1, 1))

    """

    half_t: int
    active_indices: Tuple[int, ...]
    variant: str
    span: int

    @classmethod
    def build(cls, variant: str, half_t: int) -> 'LongKernelSpec':
        """Creates the tap layout of ``variant`` for ``T = 2 * half_t``."""
        if half_t < 1:
            raise ValidationError('half_t must be positive')
        layout = _LAYOUTS.get(variant)
        if layout is None:
            raise ValidationError('unknown long-kernel variant {0!r}'.format(
                variant,
            ))
        span, taps = layout(half_t)
        if any(tap < 0 or tap >= span for tap in taps):
            raise ValidationError('taps must lie inside the kernel span')
        return cls(
            half_t=half_t, active_indices=taps, variant=variant, span=span,
        )

    @property
    def taps(self) -> int:
        """Number of learnable taps per input/output channel pair."""
        return len(self.active_indices)

    @property
    def pad(self) -> Tuple[int, int]:
        """Zero padding that makes the output exactly ``half_t`` long."""
        return (1, self.span - self.half_t - 2)


def _first_last(count: int) -> Callable[[int], Tuple[int, Tuple[int, ...]]]:
    def factory(half_t: int) -> Tuple[int, Tuple[int, ...]]:
        head = tuple(range(count))
        tail = tuple(half_t + offset for offset in range(count))
        return half_t + count, head + tail
    return factory


def _uniform5(half_t: int) -> Tuple[int, Tuple[int, ...]]:
    span = half_t + 3
    return span, tuple(
        int(math.floor(step * (span - 1) / 4 + 0.5)) for step in range(5)
    )


def _every_other(half_t: int) -> Tuple[int, Tuple[int, ...]]:
    span = half_t + 3
    return span, tuple(range(0, span, 2))


_LAYOUTS: Final = {
    'first3_last3': _first_last(3),
    'first4_last4': _first_last(4),
    'uniform5': _uniform5,
    'every_other': _every_other,
}


@final
@attr.s(frozen=True, slots=True, auto_attribs=True, eq=False)
class LstcParams(object):
    """Learnable tensors of a single layer."""

    w_short: Tensor
    w_long: Tensor
    proj_s_weight: Tensor
    proj_s_bias: Tensor
    proj_l_weight: Tensor
    proj_l_bias: Tensor
    mu: Tensor

    def named(self) -> Dict[str, Tensor]:
        """Parameters under their checkpoint names."""
        return dict(zip(PARAMETER_NAMES, (
            self.w_short,
            self.w_long,
            self.proj_s_weight,
            self.proj_s_bias,
            self.proj_l_weight,
            self.proj_l_bias,
            self.mu,
        )))

    @classmethod
    def from_named(cls, arrays: Mapping[str, np.ndarray]) -> 'LstcParams':
        """Restores parameters saved with :meth:`named`."""
        missing = [name for name in PARAMETER_NAMES if name not in arrays]
        if missing:
            raise ValidationError('missing LSTC tensors: {0}'.format(
                ', '.join(missing),
            ))
        tensors = [
            Tensor(arrays[name], requires_grad=True)
            for name in PARAMETER_NAMES
        ]
        return cls(*tensors)


@final
@attr.s(frozen=True, slots=True, auto_attribs=True)
class ParamBreakdown(object):
    """Learnable parameter counts per part of a layer."""

    short: int
    long: int
    projections: int
    mu: int

    @property
    def total(self) -> int:
        """Sum over every part."""
        return self.short + self.long + self.projections + self.mu


def init_lstc_params(  # noqa: WPS211
    in_channels: int,
    out_channels: int,
    joints: int,
    spec: LongKernelSpec,
    rng: np.random.Generator,
    dim: Optional[int] = None,
    mu_std: float = 0.0,
) -> LstcParams:
    """
    Draws initial parameters.

    Kernels and projections are ``uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))``,
    ``mu`` is all zeros unless ``mu_std`` is positive.
    The alignment dimension defaults to ``out_channels``.
    """
    dim = out_channels if dim is None else dim
    mu_shape = (dim, spec.half_t, joints)
    return LstcParams(
        w_short=init_uniform(
            rng, (out_channels, in_channels, SHORT_TAPS, 1),
            in_channels * SHORT_TAPS,
        ),
        w_long=init_uniform(
            rng, (out_channels, in_channels, spec.taps, 1),
            in_channels * spec.taps,
        ),
        proj_s_weight=init_uniform(rng, (dim, out_channels), out_channels),
        proj_s_bias=init_uniform(rng, (dim,), out_channels),
        proj_l_weight=init_uniform(rng, (dim, out_channels), out_channels),
        proj_l_bias=init_uniform(rng, (dim,), out_channels),
        mu=Tensor(
            rng.normal(0.0, mu_std, size=mu_shape) if mu_std > 0
            else np.zeros(mu_shape),
            requires_grad=True,
        ),
    )


def short_branch(features: Tensor, w_short: Tensor) -> Tensor:
    """Dense ``7x1`` convolution, stride 2, zero padding ``(3, 2)``."""
    _even_frames(features)
    return conv_time(features, w_short, SHORT_STRIDE, SHORT_PAD)


def long_branch(
    features: Tensor,
    w_long: Tensor,
    spec: LongKernelSpec,
) -> Tensor:
    """
    Sparse long-range convolution with stride 1.

    Only the taps of ``spec`` carry weights,
    so frames outside every active receptive set never reach the output.
    """
    frames = _even_frames(features)
    if spec.half_t * 2 != frames:
        raise ValidationError(
            'kernel built for T={0}, input has T={1}'.format(
                spec.half_t * 2, frames,
            ),
        )
    return conv_time_taps(
        features, w_long, spec.active_indices, spec.span, 1, spec.pad,
    )


def fusion_weight(
    short: Tensor,
    long: Tensor,
    params: LstcParams,
) -> Tensor:
    """
    Similarity weight ``S_sl + S_mu_l`` of shape ``(..., 1, T/2, V)``.

    Always lies within ``[-2, 2]``.
    """
    if short.shape != long.shape:
        raise DimensionError('branch outputs {0} and {1} differ'.format(
            short.shape, long.shape,
        ))
    aligned_short = linear_channels(
        short, params.proj_s_weight, params.proj_s_bias,
    )
    aligned_long = linear_channels(
        long, params.proj_l_weight, params.proj_l_bias,
    )
    if params.mu.shape != aligned_long.shape[-3:]:
        raise DimensionError('mu {0} does not match aligned {1}'.format(
            params.mu.shape, aligned_long.shape,
        ))
    mu = expand(params.mu, aligned_long.shape[:-3])
    return add(
        cosine_sim_channel(aligned_short, aligned_long),
        cosine_sim_channel(mu, aligned_long),
    )


def fuse(short: Tensor, long: Tensor, params: LstcParams) -> Tensor:
    """Adds the long features, weighted per position, to the short ones."""
    weight = fusion_weight(short, long, params)
    return add(short, scale_positions(weight, long))


def lstc_forward(
    features: Tensor,
    params: LstcParams,
    spec: LongKernelSpec,
) -> Tensor:
    """
    Full layer: ``(..., C_in, T, V) -> (..., C_out, T/2, V)``.

    .. code:: python

      >>> import numpy as np
      >>> from lstcmda.tensor import Tensor

      >>> rng = np.random.default_rng(0)
      >>> spec = LongKernelSpec.build('first3_last3', half_t=8)
      >>> params = init_lstc_params(2, 4, 3, spec, rng)
      >>> features = Tensor(rng.normal(size=(2, 16, 3)))
      >>> output = lstc_forward(features, params, spec)
      >>> output.shape
      (4, 8, 3)

    """
    return fuse(
        short_branch(features, params.w_short),
        long_branch(features, params.w_long, spec),
        params,
    )


def param_breakdown(
    in_channels: int,
    out_channels: int,
    dim: int,
    joints: int,
    spec: LongKernelSpec,
) -> ParamBreakdown:
    """Closed-form learnable parameter counts of one layer."""
    pair = out_channels * in_channels
    return ParamBreakdown(
        short=pair * SHORT_TAPS,
        long=pair * spec.taps,
        projections=2 * (dim * out_channels + dim),
        mu=dim * spec.half_t * joints,
    )


def learnable_param_count(  # noqa: WPS211
    in_channels: int,
    out_channels: int,
    dim: int,
    frames: int,
    joints: int,
    spec: LongKernelSpec,
) -> int:
    """
    Exact number of learnable values in one layer.

    .. code:: python

      >>> spec = LongKernelSpec.build('first3_last3', half_t=32)
      >>> breakdown = param_breakdown(64, 64, 64, 25, spec)
      >>> breakdown.long
      24576

    """
    if spec.half_t * 2 != frames:
        raise ValidationError('kernel spec does not match T')
    return param_breakdown(
        in_channels, out_channels, dim, joints, spec,
    ).total


def _even_frames(features: Tensor) -> int:
    if features.data.ndim < 3:
        raise DimensionError('expected (..., C, T, V) features')
    frames = features.shape[-2]
    if frames < 2 or frames % 2:
        raise ValidationError(
            'LSTC needs an even temporal length, got {0}'.format(frames),
        )
    return frames


def init_uniform(
    rng: np.random.Generator,
    shape: Tuple[int, ...],
    fan_in: int,
) -> Tensor:
    """Learnable tensor, uniform in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``."""
    bound = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)
