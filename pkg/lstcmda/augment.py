"""
Joint mixing data augmentation with additive mixing.

A sample is a ``(C, T, V_total)`` array with a soft label over ``K`` classes.
Three operators mix a sample with a partner from the same minibatch:

- :func:`temporal_mix` splices a block of the partner's frames
- :func:`spatial_mix` swaps whole body parts
- :func:`additive_mix` interpolates the whole sample

Labels are mixed with the share of the partner, so they stay on the simplex.
:func:`apply_pipeline` applies each operator independently, in the order
temporal, spatial, additive.
"""

import json
import zlib
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import attr
import numpy as np
from returns.result import Result
from typing_extensions import Final, final

from lstcmda.config import config_from_mapping
from lstcmda.data.skeleton import SkeletonSequence
from lstcmda.primitives.exceptions import (
    ConfigurationError,
    DimensionError,
    PairingError,
    ValidationError,
)

#: Allowed distance of a label sum from one.
SIMPLEX_TOLERANCE: Final = 1e-9

_RESOURCES: Final = Path(__file__).resolve().parent / 'resources'
_PARTITIONS: Final = ('auto', 'ntu', 'contiguous')


def _check_label(instance: 'Sample', attribute: object, label) -> None:
    if label.ndim != 1 or label.size < 1:
        raise ValidationError('label must be a non-empty vector')
    if np.any(label < 0):
        raise ValidationError('label has negative entries')
    if abs(float(label.sum()) - 1.0) > SIMPLEX_TOLERANCE:
        raise ValidationError('label does not sum to one')


def _check_features(instance: 'Sample', attribute: object, features) -> None:
    if features.ndim != 3:
        raise DimensionError('sample features must be (C, T, V)')


def _as_floats(array) -> np.ndarray:
    return np.asarray(array, dtype=np.float64)


@final
@attr.s(frozen=True, slots=True, auto_attribs=True)
class MixRecord(object):
    """One mixing step: the operator, the partner and its label share."""

    operator: str
    partner_id: str
    partner_view: str
    weight: float


@final
@attr.s(frozen=True, slots=True, eq=False)
class Sample(object):
    """Aligned features, a soft label and where the sample came from."""

    x: np.ndarray = attr.ib(converter=_as_floats, validator=_check_features)
    y: np.ndarray = attr.ib(converter=_as_floats, validator=_check_label)
    view_group: str = attr.ib()
    sample_id: str = attr.ib()
    bodies: int = attr.ib(default=1)
    provenance: Tuple[MixRecord, ...] = attr.ib(default=(), converter=tuple)

    @property
    def label(self) -> int:
        """Class with the largest label weight."""
        return int(np.argmax(self.y))


def one_hot(index: int, classes: int) -> np.ndarray:
    """
    Hard label as a probability vector.

    .. code:: python

      >>> one_hot(1, 3).tolist()
      [0.0, 1.0, 0.0]

    """
    if not 0 <= index < classes:
        raise ValidationError('class {0} outside [0, {1})'.format(
            index, classes,
        ))
    label = np.zeros(classes)
    label[index] = 1.0
    return label


def _probability(instance: object, attribute, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ConfigurationError('{0} must lie in [0, 1]'.format(
            attribute.name,
        ))


def _positive(instance: object, attribute, value: float) -> None:
    if value <= 0:
        raise ConfigurationError('{0} must be positive'.format(attribute.name))


def _partition_name(instance: object, attribute, value: str) -> None:
    if value not in _PARTITIONS:
        raise ConfigurationError('partition must be one of {0}'.format(
            ', '.join(_PARTITIONS),
        ))


@final
@attr.s(frozen=True, slots=True, auto_attribs=True)
class AugmentConfig(object):
    """
    Probabilities and options of the mixing pipeline.

    .. code:: python

      >>> AugmentConfig.from_mapping({'p_additive': '0'}).unwrap().p_additive
      0.0

    """

    p_temporal: float = attr.ib(default=0.5, validator=_probability)
    p_spatial: float = attr.ib(default=0.5, validator=_probability)
    p_additive: float = attr.ib(default=0.5, validator=_probability)
    beta_alpha: float = attr.ib(default=2.0, validator=_positive)
    view_consistent: bool = True
    rng_seed: int = 0
    partition: str = attr.ib(default='auto', validator=_partition_name)
    partition_parts: int = attr.ib(default=3, validator=_positive)

    @classmethod
    def from_mapping(
        cls,
        mapping: Mapping[str, str],
    ) -> Result['AugmentConfig', ConfigurationError]:
        """Builds the config from an ``[augment]`` section."""
        return config_from_mapping(cls, mapping)

    @classmethod
    def disabled(cls) -> 'AugmentConfig':
        """Config that leaves every sample untouched."""
        return cls(p_temporal=0.0, p_spatial=0.0, p_additive=0.0)


@final
@attr.s(frozen=True, slots=True)
class BodyPartition(object):
    """
    Named groups of joint indices covering a skeleton exactly once.

    .. code:: python

      >>> partition = BodyPartition.ntu()
      >>> partition.names
      ('torso', 'left_arm', 'right_arm', 'left_leg', 'right_leg')
      >>> len(partition.merged(['left_arm'], bodies=2))
      12

    """

    parts: Tuple[Tuple[str, Tuple[int, ...]], ...] = attr.ib(
        converter=lambda parts: tuple(
            (str(name), tuple(int(joint) for joint in joints))
            for name, joints in parts
        ),
    )
    joints: int = attr.ib()

    def __attrs_post_init__(self) -> None:
        """Every joint belongs to exactly one part."""
        if len(self.parts) < 2:
            raise ConfigurationError('a partition needs at least two parts')
        covered = sorted(
            joint for _, indices in self.parts for joint in indices
        )
        if covered != list(range(self.joints)):
            raise ConfigurationError(
                'partition does not cover joints 0..{0} exactly once'.format(
                    self.joints - 1,
                ),
            )

    @property
    def names(self) -> Tuple[str, ...]:
        """Part names in file order."""
        return tuple(name for name, _ in self.parts)

    def merged(self, names: Sequence[str], bodies: int) -> np.ndarray:
        """Indices of the named parts in every merged body."""
        lookup = dict(self.parts)
        missing = [name for name in names if name not in lookup]
        if missing:
            raise ConfigurationError('unknown body parts: {0}'.format(
                ', '.join(missing),
            ))
        base = np.array(
            sorted(joint for name in names for joint in lookup[name]),
            dtype=np.int64,
        )
        return np.concatenate([
            base + body * self.joints for body in range(bodies)
        ])

    @classmethod
    def from_document(cls, document: Mapping[str, Any]) -> 'BodyPartition':
        """
        Reads ``{"joints": V, "parts": [{"name": ..., "joints": [...]}]}``.
        """
        try:
            parts = [
                (part['name'], part['joints']) for part in document['parts']
            ]
            joints = int(document['joints'])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError('bad partition document: {0}'.format(
                exc,
            ))
        return cls(parts, joints)

    @classmethod
    def ntu(cls) -> 'BodyPartition':
        """Body parts of the 25 joint Kinect skeleton."""
        return cls.from_document(json.loads(
            (_RESOURCES / 'ntu_partition.json').read_text(encoding='utf-8'),
        ))

    @classmethod
    def contiguous(cls, joints: int, parts: int) -> 'BodyPartition':
        """Splits ``joints`` into ``parts`` runs of neighbouring indices."""
        parts = min(parts, joints)
        bounds = np.linspace(0, joints, parts + 1).round().astype(int)
        return cls(
            [
                ('part{0}'.format(index), range(start, stop))
                for index, (start, stop) in enumerate(
                    zip(bounds[:-1], bounds[1:]),
                )
            ],
            joints,
        )


def resolve_partition(config: AugmentConfig, joints: int) -> BodyPartition:
    """Partition for skeletons with ``joints`` joints per body."""
    if config.partition == 'ntu' or (
        config.partition == 'auto' and joints == BodyPartition.ntu().joints
    ):
        return BodyPartition.ntu()
    return BodyPartition.contiguous(joints, config.partition_parts)


def align_frames(
    features: np.ndarray,
    max_frames: int,
    max_bodies: int,
) -> np.ndarray:
    """
    Repeats frames and bodies cyclically up to the dataset maxima.

    ``features`` is ``(C, T, V, M)``, the result ``(C, T_max, V, M_max)``.
    Extra bodies are dropped.

    .. code:: python

      >>> import numpy as np
      >>> aligned = align_frames(np.arange(2.0).reshape(1, 2, 1, 1), 5, 2)
      >>> aligned[0, :, 0, 1].tolist()
      [0.0, 1.0, 0.0, 1.0, 0.0]

    """
    if features.ndim != 4:
        raise DimensionError('expected (C, T, V, M) features')
    _, frames, _, bodies = features.shape
    if frames < 1 or bodies < 1:
        raise ValidationError('cannot align an empty sequence')
    if frames > max_frames:
        raise ValidationError('{0} frames exceed the maximum {1}'.format(
            frames, max_frames,
        ))
    frame_index = np.arange(max_frames) % frames
    body_index = np.arange(max_bodies) % bodies
    return features[:, frame_index][..., body_index]


def merge_bodies(features: np.ndarray) -> np.ndarray:
    """``(C, T, V, M) -> (C, T, M * V)``, body-major."""
    channels, frames, joints, bodies = features.shape
    return np.ascontiguousarray(
        features.transpose(0, 1, 3, 2),
    ).reshape(channels, frames, bodies * joints)


def align_sample(
    raw: SkeletonSequence,
    max_frames: int,
    max_bodies: int,
    classes: int,
) -> Sample:
    """
    Turns a parsed capture into an aligned sample.

    Frames without bodies are dropped.
    Every frame repeats its own bodies up to ``max_bodies``,
    then real frames repeat up to ``max_frames``.
    The label is the metadata action, the view group is the camera.
    """
    if raw.metadata is None:
        raise ValidationError('sample metadata is required for labels')
    frames = [bodies for bodies in raw.frames if bodies]
    if not frames:
        raise ValidationError('cannot align an empty sequence')
    joints = frames[0][0].joints.shape[0]
    slots = np.zeros((3, len(frames), joints, max_bodies))
    for frame, bodies in enumerate(frames):
        for slot in range(max_bodies):
            slots[:, frame, :, slot] = bodies[slot % len(bodies)].joints.T
    return Sample(
        x=merge_bodies(align_frames(slots, max_frames, max_bodies)),
        y=one_hot(raw.metadata.action - 1, classes),
        view_group=raw.metadata.view_group,
        sample_id=raw.metadata.name,
        bodies=max_bodies,
    )


def additive_mix(
    first: Sample,
    second: Sample,
    lam: float,
    *,
    view_consistent: bool = True,
) -> Sample:
    """
    ``lam * first + (1 - lam) * second`` for features and labels.

    .. code:: python

      >>> import numpy as np
      >>> first = Sample(np.zeros((1, 2, 1)), one_hot(0, 2), 'c1', 'a')
      >>> second = Sample(np.ones((1, 2, 1)), one_hot(1, 2), 'c1', 'b')
      >>> mixed = additive_mix(first, second, 0.25)
      >>> mixed.x.ravel().tolist(), mixed.y.tolist()
      ([0.75, 0.75], [0.25, 0.75])

    """
    _check_pair(first, second, view_consistent)
    if not 0.0 <= lam <= 1.0:
        raise ValidationError('lam must lie in [0, 1]')
    share = 1.0 - lam
    if share == 0.0:
        features = first.x.copy()
    elif share == 1.0:
        features = second.x.copy()
    else:
        features = lam * first.x + share * second.x
    return _mixed(first, second, 'additive', features, share)


def temporal_mix(  # noqa: WPS211
    first: Sample,
    second: Sample,
    rng: np.random.Generator,
    *,
    alpha: float = 2.0,
    view_consistent: bool = True,
    length: Optional[int] = None,
    offset: Optional[int] = None,
) -> Sample:
    """
    Replaces a contiguous block of frames of ``first`` with ``second``.

    The block length is ``round(lam * T)`` with ``lam ~ Beta(alpha, alpha)``,
    its start is uniform among the offsets that keep it inside the sequence.
    ``length`` and ``offset`` force the draws.
    """
    _check_pair(first, second, view_consistent)
    frames = first.x.shape[1]
    if length is None:
        length = int(np.floor(rng.beta(alpha, alpha) * frames + 0.5))
    if not 0 <= length <= frames:
        raise ValidationError('block length outside [0, T]')
    if offset is None:
        offset = int(rng.integers(0, frames - length + 1))
    if not 0 <= offset <= frames - length:
        raise ValidationError('block does not fit into the sequence')

    features = first.x.copy()
    block = slice(offset, offset + length)
    features[:, block] = second.x[:, block]
    return _mixed(first, second, 'temporal', features, length / frames)


def spatial_mix(  # noqa: WPS211
    first: Sample,
    second: Sample,
    rng: np.random.Generator,
    partition: BodyPartition,
    *,
    view_consistent: bool = True,
    parts: Optional[Sequence[str]] = None,
) -> Sample:
    """
    Swaps the trajectories of random body parts of ``first`` for ``second``.

    At least one part is swapped and at least one kept,
    unless ``parts`` forces the choice.
    The partner's label share is the fraction of swapped joints.
    """
    _check_pair(first, second, view_consistent)
    total_joints = first.x.shape[2]
    if partition.joints * first.bodies != total_joints:
        raise ConfigurationError(
            'partition of {0} joints x {1} bodies does not fit {2}'.format(
                partition.joints, first.bodies, total_joints,
            ),
        )
    if parts is None:
        count = int(rng.integers(1, len(partition.parts)))
        chosen = rng.choice(len(partition.parts), size=count, replace=False)
        parts = [partition.names[index] for index in sorted(chosen)]

    swapped = partition.merged(parts, first.bodies)
    features = first.x.copy()
    features[:, :, swapped] = second.x[:, :, swapped]
    return _mixed(
        first, second, 'spatial', features, swapped.size / total_joints,
    )


def pair_for_mix(
    batch: Sequence[Sample],
    config: AugmentConfig,
    rng: np.random.Generator,
) -> List[Tuple[int, int]]:
    """
    Draws one mixing partner for every sample.

    View consistent pairing draws uniformly among the members of the same
    view group excluding the sample itself, so a sample never mixes with
    itself while its group has another member.
    A sample alone in its view group pairs with itself.
    Otherwise the partner is uniform over the whole batch, itself included.
    """
    if not batch:
        raise ValidationError('cannot pair an empty batch')
    picker = _PartnerPicker(batch, config.view_consistent)
    return [(index, picker.draw(index, rng)) for index in range(len(batch))]


def apply_pipeline(
    batch: Sequence[Sample],
    config: AugmentConfig,
    rng: np.random.Generator,
    partition: Optional[BodyPartition] = None,
    *,
    lam: Optional[float] = None,
) -> List[Sample]:
    """
    Augments every sample of an aligned minibatch.

    Each sample draws its own stream from the config seed,
    a per-batch key taken from ``rng`` and its id,
    so the result does not depend on the order of processing.
    Partners always come from the unaugmented batch.
    ``lam`` forces the additive weight.
    """
    if not batch:
        return []
    batch_key = int(rng.integers(0, 2 ** 32))
    if partition is None and config.p_spatial > 0:
        partition = resolve_partition(
            config, batch[0].x.shape[2] // batch[0].bodies,
        )
    picker = _PartnerPicker(batch, config.view_consistent)
    return [
        _augment_one(picker, index, config, partition, np.random.default_rng([
            config.rng_seed,
            batch_key,
            zlib.crc32(sample.sample_id.encode('utf-8')),
        ]), lam)
        for index, sample in enumerate(batch)
    ]


def _augment_one(  # noqa: WPS211
    picker: '_PartnerPicker',
    index: int,
    config: AugmentConfig,
    partition: Optional[BodyPartition],
    stream: np.random.Generator,
    lam: Optional[float],
) -> Sample:
    temporal, spatial, additive = stream.random(3) < (
        config.p_temporal, config.p_spatial, config.p_additive,
    )
    current = picker.batch[index]
    if temporal:
        current = temporal_mix(
            current,
            picker.batch[picker.draw(index, stream)],
            stream,
            alpha=config.beta_alpha,
            view_consistent=config.view_consistent,
        )
    if spatial and partition is not None:
        current = spatial_mix(
            current,
            picker.batch[picker.draw(index, stream)],
            stream,
            partition,
            view_consistent=config.view_consistent,
        )
    if additive:
        partner = picker.batch[picker.draw(index, stream)]
        if lam is None:
            lam = float(stream.beta(config.beta_alpha, config.beta_alpha))
        current = additive_mix(
            current, partner, lam, view_consistent=config.view_consistent,
        )
    return current


@final
class _PartnerPicker(object):
    """Uniform partner draws, optionally within the view group."""

    __slots__ = ('batch', '_view_consistent', '_groups', '_positions')

    def __init__(self, batch: Sequence[Sample], view_consistent: bool) -> None:
        self.batch = batch
        self._view_consistent = view_consistent
        self._groups: Dict[str, List[int]] = {}
        self._positions: List[int] = []
        for index, sample in enumerate(batch):
            members = self._groups.setdefault(sample.view_group, [])
            self._positions.append(len(members))
            members.append(index)

    def draw(self, index: int, rng: np.random.Generator) -> int:
        if not self._view_consistent:
            return int(rng.integers(0, len(self.batch)))
        members = self._groups[self.batch[index].view_group]
        if len(members) == 1:
            return index
        slot = int(rng.integers(0, len(members) - 1))
        if slot >= self._positions[index]:
            slot += 1
        return members[slot]


def _check_pair(first: Sample, second: Sample, view_consistent: bool) -> None:
    if first.x.shape != second.x.shape or first.y.shape != second.y.shape:
        raise DimensionError('cannot mix samples of shapes {0} and {1}'.format(
            first.x.shape, second.x.shape,
        ))
    if view_consistent and first.view_group != second.view_group:
        raise PairingError('view groups {0!r} and {1!r} differ'.format(
            first.view_group, second.view_group,
        ))


def _mixed(
    first: Sample,
    second: Sample,
    operator: str,
    features: np.ndarray,
    share: float,
) -> Sample:
    if share == 0.0:
        label = first.y.copy()
    elif share == 1.0:
        label = second.y.copy()
    else:
        label = (1.0 - share) * first.y + share * second.y
    record = MixRecord(
        operator=operator,
        partner_id=second.sample_id,
        partner_view=second.view_group,
        weight=float(share),
    )
    return attr.evolve(
        first,
        x=features,
        y=label,
        provenance=first.provenance + (record,) + second.provenance,
    )
