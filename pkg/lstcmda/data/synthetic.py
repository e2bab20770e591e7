"""
Labelled synthetic skeletons for desk-scale experiments.

Every class is a family of sinusoidal joint trajectories,
every view rotates the whole skeleton around the vertical axis.
"""

import math
from typing import Dict, List, Sequence

import numpy as np
from typing_extensions import Final

from lstcmda.augment import Sample, one_hot
from lstcmda.primitives.exceptions import ValidationError

#: Default Gaussian noise of every coordinate.
NOISE: Final = 0.05
#: Rotation between neighbouring views.
VIEW_STEP: Final = math.pi / 4


def synth_dataset(  # noqa: WPS211
    n_classes: int,
    n_per_class: int,
    channels: int = 3,
    frames: int = 32,
    joints: int = 25,
    n_views: int = 2,
    seed: int = 0,
    noise: float = NOISE,
) -> List[Sample]:
    """
    Classes move every joint with frequency ``1 + class``.

    Sample ``i`` of a class belongs to view ``i % n_views``.

    .. code:: python

      >>> samples = synth_dataset(2, 3, frames=8, joints=4, noise=0.0)
      >>> len(samples), samples[0].x.shape
      (6, (3, 8, 4))
      >>> samples[0].view_group, samples[1].view_group
      ('view0', 'view1')
      >>> bool((samples[0].x == samples[2].x).all())
      True

    """
    _check_sizes(n_classes, n_per_class, n_views)
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0, 2 * math.pi, size=(channels, joints))
    rest = rng.normal(0, 0.3, size=(channels, 1, joints))
    time = np.arange(frames)[None, :, None] / frames

    samples = []
    for label in range(n_classes):
        motion = rest + np.sin(
            2 * math.pi * (1 + label) * time + phases[:, None, :],
        )
        for index in range(n_per_class):
            view = index % n_views
            samples.append(Sample(
                x=rotate_view(motion, view) + _noise(rng, motion.shape, noise),
                y=one_hot(label, n_classes),
                view_group='view{0}'.format(view),
                sample_id='synth-{0}-{1}'.format(label, index),
            ))
    return samples


def synth_long_range_dataset(  # noqa: WPS211
    n_per_class: int,
    channels: int = 3,
    frames: int = 48,
    joints: int = 4,
    n_views: int = 1,
    seed: int = 0,
    noise: float = NOISE,
    patterns: int = 2,
) -> List[Sample]:
    """
    Two classes told apart only by comparing distant frames.

    The first and the last third of a sequence each show one of
    ``patterns`` motions, the middle third is unrelated filler.
    Class ``1`` means both ends show the same motion, class ``0`` they differ.
    Both ends are uniform over the patterns in each class,
    so no single third predicts the label.
    """
    _check_sizes(2, n_per_class, n_views)
    if patterns < 2:
        raise ValidationError('need at least two patterns')
    third = frames // 3
    if third < 1:
        raise ValidationError('need at least three frames')
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0, 2 * math.pi, size=(channels, joints))
    local = np.arange(third)[None, :, None] / third
    shapes = [
        np.sin(2 * math.pi * (1 + pattern) * local + phases[:, None, :])
        for pattern in range(patterns)
    ]

    samples = []
    for label in (0, 1):
        for index in range(n_per_class):
            head = int(rng.integers(0, patterns))
            tail = head if label else (
                head + int(rng.integers(1, patterns))
            ) % patterns
            motion = rng.normal(0, 0.5, size=(channels, frames, joints))
            motion[:, :third] = shapes[head]
            motion[:, frames - third:] = shapes[tail]
            view = index % n_views
            samples.append(Sample(
                x=rotate_view(motion, view) + _noise(rng, motion.shape, noise),
                y=one_hot(label, 2),
                view_group='view{0}'.format(view),
                sample_id='long-{0}-{1}'.format(label, index),
            ))
    return samples


def rotate_view(motion: np.ndarray, view: int) -> np.ndarray:
    """
    Rotates channels ``0`` and ``2`` by ``view * pi / 4``.

    Skeletons with fewer than three channels are returned as they are.
    """
    if motion.shape[0] < 3 or view == 0:
        return motion.copy()
    angle = view * VIEW_STEP
    rotated = motion.copy()
    rotated[0] = math.cos(angle) * motion[0] - math.sin(angle) * motion[2]
    rotated[2] = math.sin(angle) * motion[0] + math.cos(angle) * motion[2]
    return rotated


def split_by_index(
    samples: Sequence[Sample],
    every: int = 5,
) -> Dict[str, List[Sample]]:
    """Every ``every``-th sample goes to ``val``, the rest to ``train``."""
    return {
        'train': [
            sample for index, sample in enumerate(samples)
            if index % every
        ],
        'val': [
            sample for index, sample in enumerate(samples)
            if not index % every
        ],
    }


def nearest_centroid_accuracy(
    train: Sequence[Sample],
    test: Sequence[Sample],
) -> float:
    """
    Accuracy of the closest class mean of flattened trajectories.

    Shows that a dataset is separable before any model is trained.
    """
    if not train or not test:
        raise ValidationError('nearest centroid needs samples on both sides')
    features = np.stack([sample.x.ravel() for sample in train])
    labels = np.array([sample.label for sample in train])
    classes = np.unique(labels)
    centroids = np.stack([
        features[labels == label].mean(axis=0) for label in classes
    ])
    queries = np.stack([sample.x.ravel() for sample in test])
    distances = (
        (queries[:, None, :] - centroids[None, :, :]) ** 2
    ).sum(axis=-1)
    predicted = classes[np.argmin(distances, axis=1)]
    truth = np.array([sample.label for sample in test])
    return float(np.mean(predicted == truth))


def _check_sizes(n_classes: int, n_per_class: int, n_views: int) -> None:
    if n_classes < 2:
        raise ValidationError('need at least two classes')
    if n_per_class < 1 or n_views < 1:
        raise ValidationError('need at least one sample and one view')


def _noise(
    rng: np.random.Generator,
    shape: Sequence[int],
    scale: float,
) -> np.ndarray:
    if scale <= 0:
        return np.zeros(shape)
    return rng.normal(0, scale, size=shape)
