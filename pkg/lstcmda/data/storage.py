"""Samples, skeletons and score sets inside the array container."""

from pathlib import Path
from typing import Any, Dict, List, Sequence

import attr
import numpy as np
from returns.io import IOResult
from returns.result import Failure, Result, Success
from typing_extensions import Final, final

from lstcmda.augment import MixRecord, Sample
from lstcmda.codec import (
    Container,
    ContainerFormat,
    as_container,
    read_container,
    write_container,
)
from lstcmda.data.skeleton import Body, SampleMetadata, SkeletonSequence
from lstcmda.primitives.exceptions import DimensionError, ValidationError

SAMPLES_KIND: Final = 'samples'
SKELETON_KIND: Final = 'skeleton'
SCORES_KIND: Final = 'scores'


@final
@attr.s(frozen=True, slots=True, auto_attribs=True, eq=False)
class ScoreSet(object):
    """Class scores of one model over a labelled sample list."""

    scores: np.ndarray  # (N, K)
    labels: np.ndarray  # (N,)
    sample_ids: List[str]
    modality: str = 'joint'

    def __attrs_post_init__(self) -> None:
        """Scores are one row per labelled sample."""
        if self.scores.ndim != 2 or self.scores.shape[0] != len(self.labels):
            raise DimensionError('scores must be (N, K) with N labels')


def samples_to_container(samples: Sequence[Sample]) -> Container:
    """Stacks samples into ``x`` ``(N, C, T, V)`` and ``y`` ``(N, K)``."""
    if not samples:
        raise ValidationError('cannot store an empty sample list')
    return as_container(
        {
            'kind': SAMPLES_KIND,
            'ids': [sample.sample_id for sample in samples],
            'views': [sample.view_group for sample in samples],
            'bodies': [sample.bodies for sample in samples],
            'provenance': [
                [attr.asdict(record) for record in sample.provenance]
                for sample in samples
            ],
        },
        {
            'x': np.stack([sample.x for sample in samples]),
            'y': np.stack([sample.y for sample in samples]),
        },
    )


def samples_from_container(
    container: Container,
) -> Result[List[Sample], ValidationError]:
    """Inverse of :func:`samples_to_container`."""
    meta = container.meta
    if meta.get('kind') != SAMPLES_KIND:
        return Failure(ValidationError('container does not hold samples'))
    try:
        return Success([
            Sample(
                x=features,
                y=label,
                view_group=view,
                sample_id=sample_id,
                bodies=int(bodies),
                provenance=[MixRecord(**record) for record in records],
            )
            for features, label, view, sample_id, bodies, records in zip(
                container.arrays['x'],
                container.arrays['y'],
                meta['views'],
                meta['ids'],
                meta['bodies'],
                meta['provenance'],
            )
        ])
    except (KeyError, TypeError, ValueError) as exc:
        return Failure(ValidationError('bad sample container: {0}'.format(
            exc,
        )))


def write_samples(
    path: Path,
    samples: Sequence[Sample],
    fmt: ContainerFormat = 'binary',
) -> IOResult[Path, Exception]:
    """Writes a sample list."""
    return write_container(path, samples_to_container(samples), fmt)


def read_samples(path: Path) -> IOResult[List[Sample], Exception]:
    """Reads a sample list."""
    return read_container(path).bind_result(samples_from_container)


def skeleton_to_container(sequence: SkeletonSequence) -> Container:
    """
    Dense ``joints`` ``(T, M, V, 3)`` and ``tracking`` ``(T, M, V)`` arrays.

    Frames with fewer bodies are zero filled, body counts are kept in meta.
    """
    frames = sequence.frame_count
    bodies = sequence.max_bodies
    joints = sequence.joint_count
    coordinates = np.zeros((frames, bodies, joints, 3))
    tracking = np.zeros((frames, bodies, joints))
    for frame, frame_bodies in enumerate(sequence.frames):
        for slot, body in enumerate(frame_bodies):
            coordinates[frame, slot] = body.joints
            tracking[frame, slot] = body.tracking
    meta: Dict[str, Any] = {
        'kind': SKELETON_KIND,
        'body_counts': [len(frame_bodies) for frame_bodies in sequence.frames],
        'body_ids': [
            [body.body_id for body in frame_bodies]
            for frame_bodies in sequence.frames
        ],
    }
    if sequence.metadata is not None:
        meta['metadata'] = attr.asdict(sequence.metadata)
        meta['name'] = sequence.metadata.name
    return as_container(meta, {'joints': coordinates, 'tracking': tracking})


def skeleton_from_container(
    container: Container,
) -> Result[SkeletonSequence, ValidationError]:
    """Inverse of :func:`skeleton_to_container`."""
    meta = container.meta
    if meta.get('kind') != SKELETON_KIND:
        return Failure(ValidationError('container does not hold a skeleton'))
    try:
        coordinates = container.arrays['joints']
        tracking = container.arrays['tracking'].astype(np.int64)
        frames = tuple(
            tuple(
                Body(
                    body_id=ids[slot],
                    joints=coordinates[frame, slot].copy(),
                    tracking=tracking[frame, slot].copy(),
                )
                for slot in range(count)
            )
            for frame, (count, ids) in enumerate(
                zip(meta['body_counts'], meta['body_ids']),
            )
        )
        metadata = meta.get('metadata')
    except (KeyError, IndexError, TypeError) as exc:
        return Failure(ValidationError('bad skeleton container: {0}'.format(
            exc,
        )))
    return Success(SkeletonSequence(
        frames=frames,
        metadata=None if metadata is None else SampleMetadata(**metadata),
    ))


def scores_to_container(score_set: ScoreSet) -> Container:
    """Stores scores, labels and ids of one evaluation."""
    return as_container(
        {
            'kind': SCORES_KIND,
            'ids': list(score_set.sample_ids),
            'modality': score_set.modality,
        },
        {'scores': score_set.scores, 'labels': score_set.labels},
    )


def scores_from_container(
    container: Container,
) -> Result[ScoreSet, ValidationError]:
    """Inverse of :func:`scores_to_container`."""
    meta = container.meta
    if meta.get('kind') != SCORES_KIND:
        return Failure(ValidationError('container does not hold scores'))
    try:
        return Success(ScoreSet(
            scores=container.arrays['scores'],
            labels=container.arrays['labels'].astype(np.int64),
            sample_ids=list(meta['ids']),
            modality=str(meta.get('modality', 'joint')),
        ))
    except (KeyError, DimensionError) as exc:
        return Failure(ValidationError('bad score container: {0}'.format(
            exc,
        )))


def read_scores(path: Path) -> IOResult[ScoreSet, Exception]:
    """Reads one score file."""
    return read_container(path).bind_result(scores_from_container)
