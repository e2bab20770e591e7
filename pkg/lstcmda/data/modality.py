"""
Joint, bone and motion views of one skeleton.

Features are ``(C, T, V_total)`` arrays, bodies merged body-major:
joint ``v`` of body ``m`` lives at index ``m * V + v``.
"""

import json
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, TypeVar

import attr
import numpy as np
from typing_extensions import Final, Literal, final

from lstcmda.primitives.exceptions import DimensionError, ValidationError

Modality = Literal['joint', 'bone', 'joint_motion', 'bone_motion']

#: Every modality in ensemble order.
MODALITIES: Final = ('joint', 'bone', 'joint_motion', 'bone_motion')

_RESOURCES: Final = Path(__file__).resolve().parent.parent / 'resources'

_SampleType = TypeVar('_SampleType')


@final
@attr.s(frozen=True, slots=True)
class JointTopology(object):
    """
    Skeletal tree as a parent index per joint, the root is its own parent.

    .. code:: python

      >>> topology = JointTopology.ntu()
      >>> topology.joints, topology.root
      (25, 0)
      >>> JointTopology.chain(3).parents
      (0, 0, 1)

    """

    parents: Tuple[int, ...] = attr.ib(converter=tuple)

    def __attrs_post_init__(self) -> None:
        """Rejects parent maps that are not a single rooted tree."""
        _check_tree(self.parents)

    @property
    def joints(self) -> int:
        """Joint count ``V``."""
        return len(self.parents)

    @property
    def root(self) -> int:
        """Index of the only self-parented joint."""
        return next(
            joint for joint, parent in enumerate(self.parents)
            if joint == parent
        )

    def order(self) -> Tuple[int, ...]:
        """Joints sorted so that every parent precedes its children."""
        return tuple(sorted(range(self.joints), key=self._depth))

    def merged_parents(self, bodies: int) -> np.ndarray:
        """Parent map over ``bodies`` merged skeletons."""
        base = np.asarray(self.parents, dtype=np.int64)
        return np.concatenate([base + body * self.joints for body in range(
            bodies,
        )])

    @classmethod
    def ntu(cls) -> 'JointTopology':
        """Kinect v2 tree rooted at the spine base."""
        document = json.loads(
            (_RESOURCES / 'ntu_topology.json').read_text(encoding='utf-8'),
        )
        return cls(document['parents'])

    @classmethod
    def chain(cls, joints: int) -> 'JointTopology':
        """Joints hanging one after another from joint ``0``."""
        return cls([0] + list(range(joints - 1)))

    def _depth(self, joint: int) -> int:
        depth = 0
        while self.parents[joint] != joint:
            joint = self.parents[joint]
            depth += 1
        return depth


def derive_modalities(
    joint: np.ndarray,
    topology: JointTopology,
    bodies: int = 1,
) -> Dict[str, np.ndarray]:
    """
    Computes the four modalities of a ``(C, T, V_total)`` joint array.

    Bones point from the parent to the joint, the root bone is zero.
    Motion is the forward difference in time, the last frame is zero.

    .. code:: python

      >>> import numpy as np
      >>> joint = np.zeros((3, 2, 2))
      >>> joint[0, :, 1] = 1.0
      >>> views = derive_modalities(joint, JointTopology.chain(2))
      >>> views['bone'][:, 0, 1].tolist()
      [1.0, 0.0, 0.0]
      >>> float(np.abs(views['joint_motion']).max())
      0.0

    """
    joint = np.asarray(joint, dtype=np.float64)
    if joint.ndim != 3:
        raise DimensionError('expected a (C, T, V) joint array')
    if joint.shape[-1] != topology.joints * bodies:
        raise DimensionError(
            'topology has {0} joints x {1} bodies, array has {2}'.format(
                topology.joints, bodies, joint.shape[-1],
            ),
        )
    bone = joint - joint[:, :, topology.merged_parents(bodies)]
    return {
        'joint': joint.copy(),
        'bone': bone,
        'joint_motion': temporal_difference(joint),
        'bone_motion': temporal_difference(bone),
    }


def temporal_difference(features: np.ndarray) -> np.ndarray:
    """``x[:, t + 1] - x[:, t]`` with a zero last frame."""
    motion = np.zeros_like(features)
    motion[:, :-1] = features[:, 1:] - features[:, :-1]
    return motion


def reconstruct_joints(
    bone: np.ndarray,
    topology: JointTopology,
    bodies: int = 1,
) -> np.ndarray:
    """
    Sums bones from the root down, giving joints relative to the root.

    Inverts the bone modality up to the root position of every body.
    """
    joints = np.zeros_like(bone)
    for body in range(bodies):
        offset = body * topology.joints
        for joint in topology.order():
            parent = topology.parents[joint]
            if parent != joint:
                joints[:, :, offset + joint] = (
                    joints[:, :, offset + parent] + bone[:, :, offset + joint]
                )
    return joints


def _check_tree(parents: Sequence[int]) -> None:
    joints = len(parents)
    if not joints:
        raise ValidationError('topology needs at least one joint')
    if any(parent < 0 or parent >= joints for parent in parents):
        raise ValidationError('parent index out of range')
    roots = [joint for joint, parent in enumerate(parents) if joint == parent]
    if len(roots) != 1:
        raise ValidationError('topology needs exactly one root, got {0}'.format(
            len(roots),
        ))
    for start in range(joints):
        joint, steps = start, 0
        while parents[joint] != joint:
            joint = parents[joint]
            steps += 1
            if steps > joints:
                raise ValidationError('parent map has a cycle')


def with_modality(
    samples: Sequence[_SampleType],
    modality: str,
    topology: JointTopology,
) -> List[_SampleType]:
    """Replaces the joint features of every sample by one modality."""
    if modality not in MODALITIES:
        raise ValidationError('unknown modality {0!r}'.format(modality))
    return [
        attr.evolve(sample, x=derive_modalities(
            sample.x, topology, sample.bodies,  # type: ignore
        )[modality])
        for sample in samples
    ]
