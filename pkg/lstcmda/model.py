"""
Toy skeleton classifier around three LSTC layers.

.. code:: text

  (N, 3, T, V)
    -> channel projection + positional embedding     (N, C, T, V)
    -> stage 1 -> LSTC -> stage 2 -> LSTC            (N, 2C, T/4, V)
    -> stage 3 -> LSTC -> stage 4                    (N, 2C, T/8, V)
    -> mean over (t, v) -> linear head               (N, K)

Every stage is a channel MLP with a residual connection.
The downsampling layers can be swapped for a plain stride 2 convolution.
"""

from pathlib import Path
from typing import Any, Dict, List, Mapping, Tuple

import attr
import numpy as np
from returns.io import IOResult
from returns.result import Failure, Result, Success
from typing_extensions import Final, final

from lstcmda.codec import (
    Container,
    ContainerFormat,
    as_container,
    read_container,
    write_container,
)
from lstcmda.config import config_from_mapping
from lstcmda.lstc import (
    SHORT_PAD,
    SHORT_STRIDE,
    SHORT_TAPS,
    VARIANTS,
    LongKernelSpec,
    LstcParams,
    init_lstc_params,
    init_uniform,
    learnable_param_count,
    lstc_forward,
)
from lstcmda.primitives.exceptions import (
    ConfigurationError,
    DimensionError,
    ValidationError,
)
from lstcmda.tensor import (
    Tensor,
    add,
    conv_time,
    expand,
    gelu,
    global_pool_mean,
    linear,
    linear_channels,
)

#: Downsampling layers between the stages.
DOWNSAMPLE_LAYERS: Final = 3
#: Standard deviation of the positional embedding.
POSITION_STD: Final = 0.02

CHECKPOINT_KIND: Final = 'checkpoint'
_DOWNSAMPLE: Final = ('lstc', 'tconv')


def _variants(instance: object, attribute, variants: Tuple[str, ...]) -> None:
    if len(variants) != DOWNSAMPLE_LAYERS:
        raise ConfigurationError('need one kernel variant per LSTC layer')
    unknown = [variant for variant in variants if variant not in VARIANTS]
    if unknown:
        raise ConfigurationError('unknown kernel variants: {0}'.format(
            ', '.join(unknown),
        ))


def _downsample(instance: object, attribute, value: str) -> None:
    if value not in _DOWNSAMPLE:
        raise ConfigurationError('downsample must be lstc or tconv')


@final
@attr.s(frozen=True, slots=True, auto_attribs=True)
class ToyModelConfig(object):
    """
    Shape and initialisation of the toy model.

    ``stage_widths`` defaults to ``(C, C, 2C, 2C)``.
    """

    embed_channels: int = 8
    frames: int = 64
    joints: int = 25
    in_channels: int = 3
    n_classes: int = 4
    kernel_variants: Tuple[str, ...] = attr.ib(
        default=('first3_last3',) * DOWNSAMPLE_LAYERS,
        converter=tuple,
        validator=_variants,
    )
    downsample: str = attr.ib(default='lstc', validator=_downsample)
    stage_widths: Tuple[int, ...] = attr.ib(default=(), converter=tuple)
    mlp_ratio: int = 2
    mu_std: float = 0.02
    seed: int = 0

    def __attrs_post_init__(self) -> None:
        """Three halvings of time and four stages ending at ``2C``."""
        if self.frames < 8 or self.frames % 8:
            raise ConfigurationError(
                'frames must be a positive multiple of 8, got {0}'.format(
                    self.frames,
                ),
            )
        if min(self.embed_channels, self.joints, self.in_channels) < 1:
            raise ConfigurationError('dimensions must be positive')
        if self.n_classes < 2 or self.mlp_ratio < 1:
            raise ConfigurationError('need two classes and mlp_ratio >= 1')
        widths = self.widths
        if len(widths) != DOWNSAMPLE_LAYERS + 1:
            raise ConfigurationError('need exactly four stage widths')
        if widths[-1] != 2 * self.embed_channels or widths[0] != (
            self.embed_channels
        ):
            raise ConfigurationError('stages must run from C to 2C')

    @property
    def widths(self) -> Tuple[int, ...]:
        """Effective stage widths."""
        if self.stage_widths:
            return self.stage_widths
        channels = self.embed_channels
        return (channels, channels, 2 * channels, 2 * channels)

    @classmethod
    def from_mapping(
        cls,
        mapping: Mapping[str, Any],
    ) -> Result['ToyModelConfig', ConfigurationError]:
        """Builds the config from a ``[model]`` section."""
        return config_from_mapping(cls, mapping)


@final
class ToyModel(object):
    """Parameters and forward pass of the toy classifier."""

    __slots__ = ('config', '_params', '_specs', '_lstc')

    def __init__(self, config: ToyModelConfig) -> None:
        """Draws fresh parameters from ``config.seed``."""
        self.config = config
        self._params: Dict[str, Tensor] = {}
        self._specs: List[LongKernelSpec] = []
        self._lstc: List[LstcParams] = []
        self._initialise(np.random.default_rng(config.seed))

    def parameters(self) -> Dict[str, Tensor]:
        """Every learnable tensor under its checkpoint name."""
        return dict(self._params)

    def state(self) -> Dict[str, np.ndarray]:
        """Copies of every parameter value."""
        return {
            name: tensor.data.copy() for name, tensor in self._params.items()
        }

    def load_state(self, arrays: Mapping[str, np.ndarray]) -> None:
        """Replaces parameter values, names and shapes must match."""
        missing = set(self._params) - set(arrays)
        if missing:
            raise ValidationError('missing parameters: {0}'.format(
                ', '.join(sorted(missing)),
            ))
        for name, tensor in self._params.items():
            value = np.asarray(arrays[name], dtype=np.float64)
            if value.shape != tensor.shape:
                raise DimensionError('{0}: expected {1}, got {2}'.format(
                    name, tensor.shape, value.shape,
                ))
            tensor.data = value.copy()

    def features(self, inputs: Tensor) -> Tensor:
        """Pre-pool features ``(..., 2C, T/8, V)``."""
        expected = (
            self.config.in_channels, self.config.frames, self.config.joints,
        )
        if inputs.shape[-3:] != expected:
            raise DimensionError('model expects (..., {0}, {1}, {2})'.format(
                *expected,
            ))
        hidden = linear_channels(
            inputs, self._params['embed.W'], self._params['embed.b'],
        )
        hidden = add(
            hidden, expand(self._params['position'], hidden.shape[:-3]),
        )
        for stage in range(DOWNSAMPLE_LAYERS):
            hidden = self._downsample(stage, self._block(stage, hidden))
        return self._block(DOWNSAMPLE_LAYERS, hidden)

    def forward(self, inputs: Tensor) -> Tensor:
        """Class logits ``(..., K)``."""
        pooled = global_pool_mean(self.features(inputs))
        return linear(pooled, self._params['head.W'], self._params['head.b'])

    def _block(self, stage: int, hidden: Tensor) -> Tensor:
        prefix = 'stage{0}.'.format(stage)
        inner = gelu(linear_channels(
            hidden,
            self._params[prefix + 'fc1.W'],
            self._params[prefix + 'fc1.b'],
        ))
        return add(hidden, linear_channels(
            inner,
            self._params[prefix + 'fc2.W'],
            self._params[prefix + 'fc2.b'],
        ))

    def _downsample(self, layer: int, hidden: Tensor) -> Tensor:
        if self.config.downsample == 'tconv':
            return conv_time(
                hidden,
                self._params['down{0}.w'.format(layer)],
                SHORT_STRIDE,
                SHORT_PAD,
            )
        return lstc_forward(hidden, self._lstc[layer], self._specs[layer])

    def _initialise(self, rng: np.random.Generator) -> None:
        config = self.config
        widths = config.widths
        channels = config.embed_channels
        self._params['embed.W'] = init_uniform(
            rng, (channels, config.in_channels), config.in_channels,
        )
        self._params['embed.b'] = init_uniform(
            rng, (channels,), config.in_channels,
        )
        self._params['position'] = Tensor(
            rng.normal(
                0, POSITION_STD, size=(channels, config.frames, config.joints),
            ),
            requires_grad=True,
        )
        frames = config.frames
        for stage, width in enumerate(widths):
            self._add_block(stage, width, rng)
            if stage < DOWNSAMPLE_LAYERS:
                self._add_downsample(
                    stage, width, widths[stage + 1], frames, rng,
                )
                frames //= 2
        self._params['head.W'] = init_uniform(
            rng, (config.n_classes, widths[-1]), widths[-1],
        )
        self._params['head.b'] = init_uniform(
            rng, (config.n_classes,), widths[-1],
        )

    def _add_block(
        self,
        stage: int,
        width: int,
        rng: np.random.Generator,
    ) -> None:
        hidden = width * self.config.mlp_ratio
        prefix = 'stage{0}.'.format(stage)
        self._params[prefix + 'fc1.W'] = init_uniform(
            rng, (hidden, width), width,
        )
        self._params[prefix + 'fc1.b'] = init_uniform(rng, (hidden,), width)
        self._params[prefix + 'fc2.W'] = init_uniform(
            rng, (width, hidden), hidden,
        )
        self._params[prefix + 'fc2.b'] = init_uniform(rng, (width,), hidden)

    def _add_downsample(  # noqa: WPS211
        self,
        layer: int,
        in_channels: int,
        out_channels: int,
        frames: int,
        rng: np.random.Generator,
    ) -> None:
        prefix = 'down{0}.'.format(layer)
        if self.config.downsample == 'tconv':
            self._params[prefix + 'w'] = init_uniform(
                rng,
                (out_channels, in_channels, SHORT_TAPS, 1),
                in_channels * SHORT_TAPS,
            )
            return
        spec = LongKernelSpec.build(
            self.config.kernel_variants[layer], frames // 2,
        )
        params = init_lstc_params(
            in_channels,
            out_channels,
            self.config.joints,
            spec,
            rng,
            mu_std=self.config.mu_std,
        )
        self._specs.append(spec)
        self._lstc.append(params)
        for name, tensor in params.named().items():
            self._params[prefix + name] = tensor


def build_model(config: ToyModelConfig) -> ToyModel:
    """
    Creates a freshly initialised model.

    .. code:: python

      >>> import numpy as np
      >>> from lstcmda.tensor import Tensor
      >>> config = ToyModelConfig(frames=16, joints=5, n_classes=3)
      >>> model = build_model(config)
      >>> batch = Tensor(np.zeros((2, 3, 16, 5)))
      >>> model.features(batch).shape, model.forward(batch).shape
      ((2, 16, 2, 5), (2, 3))

    """
    return ToyModel(config)


def model_param_count(config: ToyModelConfig) -> int:
    """Closed-form number of learnable values of :func:`build_model`."""
    widths = config.widths
    channels = config.embed_channels
    count = channels * config.in_channels + channels
    count += channels * config.frames * config.joints
    for width in widths:
        hidden = width * config.mlp_ratio
        count += 2 * hidden * width + hidden + width
    frames = config.frames
    for layer in range(DOWNSAMPLE_LAYERS):
        in_channels, out_channels = widths[layer], widths[layer + 1]
        if config.downsample == 'tconv':
            count += out_channels * in_channels * SHORT_TAPS
        else:
            count += learnable_param_count(
                in_channels,
                out_channels,
                out_channels,
                frames,
                config.joints,
                LongKernelSpec.build(
                    config.kernel_variants[layer], frames // 2,
                ),
            )
        frames //= 2
    return count + config.n_classes * widths[-1] + config.n_classes


def checkpoint_container(model: ToyModel) -> Container:
    """Config and parameters of a model."""
    return as_container(
        {'kind': CHECKPOINT_KIND, 'config': attr.asdict(model.config)},
        model.state(),
    )


def model_from_container(
    container: Container,
) -> Result[ToyModel, ValidationError]:
    """Rebuilds a model saved with :func:`checkpoint_container`."""
    if container.meta.get('kind') != CHECKPOINT_KIND:
        return Failure(ValidationError('container is not a checkpoint'))
    try:
        model = build_model(ToyModelConfig(**container.meta['config']))
        model.load_state(container.arrays)
    except (KeyError, TypeError, ValueError) as exc:
        return Failure(ValidationError('bad checkpoint: {0}'.format(exc)))
    return Success(model)


def save_checkpoint(
    path: Path,
    model: ToyModel,
    fmt: ContainerFormat = 'binary',
) -> IOResult[Path, Exception]:
    """Writes a checkpoint."""
    return write_container(path, checkpoint_container(model), fmt)


def load_checkpoint(path: Path) -> IOResult[ToyModel, Exception]:
    """Reads a checkpoint."""
    return read_container(path).bind_result(model_from_container)

