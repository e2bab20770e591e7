"""
NTU RGB+D ``.skeleton`` text files and sample names.

Layout of a file::

  <frame count>
  per frame:  <body count>
    per body: <body info: 10 fields>
              <joint count>
              per joint: x y z depthX depthY colorX colorY
                         orientW orientX orientY orientZ trackingState

Only ``x y z`` and the tracking state of every joint are kept.
"""

import re
from pathlib import PurePath
from typing import List, Optional, Tuple, Union

import attr
import numpy as np
from returns.result import Failure, Result, Success
from typing_extensions import Final, final

from lstcmda.primitives.exceptions import (
    MetadataParseError,
    SkeletonParseError,
)

#: Joints of a Kinect v2 body.
NTU_JOINTS: Final = 25

_BODY_INFO_FIELDS: Final = 10
_JOINT_FIELDS: Final = 12
_TRACKING_STATES: Final = frozenset((0, 1, 2))
_NAME: Final = re.compile(
    r'^S(\d{3})C(\d{3})P(\d{3})R(\d{3})A(\d{3})$',
)


@final
@attr.s(frozen=True, slots=True, auto_attribs=True)
class SampleMetadata(object):
    """
    Fields encoded in an NTU sample name ``SsssCcccPpppRrrrAaaa``.

    .. code:: python

      >>> meta = parse_sample_metadata('S001C002P003R002A013').unwrap()
      >>> meta.camera, meta.action, meta.setup
      (2, 13, 1)
      >>> meta.name
      'S001C002P003R002A013'

    """

    setup: int
    camera: int
    performer: int
    replication: int
    action: int

    @property
    def name(self) -> str:
        """Canonical sample name."""
        return 'S{0:03d}C{1:03d}P{2:03d}R{3:03d}A{4:03d}'.format(
            self.setup,
            self.camera,
            self.performer,
            self.replication,
            self.action,
        )

    @property
    def view_group(self) -> str:
        """Camera key used by cross-view grouping."""
        return 'C{0:03d}'.format(self.camera)

    @property
    def setup_group(self) -> str:
        """Setup key used by cross-set grouping."""
        return 'S{0:03d}'.format(self.setup)


@final
@attr.s(frozen=True, slots=True, auto_attribs=True, eq=False)
class Body(object):
    """One tracked body in one frame."""

    body_id: str
    joints: np.ndarray  # (V, 3) meters
    tracking: np.ndarray  # (V,) tracking state


@final
@attr.s(frozen=True, slots=True, auto_attribs=True, eq=False)
class SkeletonSequence(object):
    """Parsed capture: bodies per frame and optional name metadata."""

    frames: Tuple[Tuple[Body, ...], ...]
    metadata: Optional[SampleMetadata] = None

    @property
    def frame_count(self) -> int:
        """Number of frames, empty ones included."""
        return len(self.frames)

    @property
    def max_bodies(self) -> int:
        """Largest body count over all frames."""
        return max((len(bodies) for bodies in self.frames), default=0)

    @property
    def joint_count(self) -> int:
        """Joints per body, zero when no body was tracked."""
        for bodies in self.frames:
            if bodies:
                return bodies[0].joints.shape[0]
        return 0

    def to_array(self) -> np.ndarray:
        """Dense ``(3, T, V, M)`` coordinates, missing bodies are zeros."""
        array = np.zeros(
            (3, self.frame_count, self.joint_count, self.max_bodies),
        )
        for frame, bodies in enumerate(self.frames):
            for slot, body in enumerate(bodies):
                array[:, frame, :, slot] = body.joints.T
        return array


def parse_sample_metadata(
    filename: str,
) -> Result[SampleMetadata, MetadataParseError]:
    """
    Reads the five integer fields of an NTU sample name.

    Directories and the ``.skeleton`` suffix are ignored.

    .. code:: python

      >>> from returns.pipeline import is_successful
      >>> meta = parse_sample_metadata('data/S018C001P042R001A120.skeleton')
      >>> meta.unwrap().setup, meta.unwrap().action
      (18, 120)
      >>> is_successful(parse_sample_metadata('badname'))
      False

    """
    stem = PurePath(filename).name
    if stem.endswith('.skeleton'):
        stem = stem[:-len('.skeleton')]
    match = _NAME.match(stem)
    if match is None:
        return Failure(MetadataParseError(
            '{0!r} is not an SsssCcccPpppRrrrAaaa name'.format(filename),
        ))
    return Success(SampleMetadata(*(int(group) for group in match.groups())))


def parse_ntu_skeleton(
    text: Union[str, bytes],
    joints: Optional[int] = NTU_JOINTS,
    metadata: Optional[SampleMetadata] = None,
) -> Result[SkeletonSequence, SkeletonParseError]:
    """
    Parses a ``.skeleton`` stream.

    Every problem is reported with the line where it was found.
    ``joints=None`` accepts any joint count that stays constant.

    .. code:: python

      >>> zero_joint = ' '.join(['0'] * 12)
      >>> fixture = '\\n'.join(
      ...     ['1', '1', '7 0 0 0 0 0 0 0 0 2', '1', zero_joint],
      ... )
      >>> sequence = parse_ntu_skeleton(fixture, joints=1).unwrap()
      >>> sequence.frame_count, sequence.max_bodies
      (1, 1)

      >>> truncated = parse_ntu_skeleton('2\\n0\\n', joints=1)
      >>> str(truncated.failure())
      'line 3: frame 2 of 2: unexpected end of input, expected body count'

    """
    if isinstance(text, bytes):
        try:
            text = text.decode('ascii')
        except UnicodeDecodeError as exc:
            return Failure(SkeletonParseError(
                'non-ASCII byte in input',
                line=text.count(b'\n', 0, exc.start) + 1,
            ))
    reader = _LineReader(text)
    try:
        frames = _read_frames(reader, joints)
    except SkeletonParseError as exc:
        return Failure(exc)
    return Success(SkeletonSequence(frames=frames, metadata=metadata))


def format_ntu_skeleton(sequence: SkeletonSequence) -> str:
    """Writes a sequence back into the ``.skeleton`` layout."""
    lines = [str(sequence.frame_count)]
    for bodies in sequence.frames:
        lines.append(str(len(bodies)))
        for body in bodies:
            lines.append('{0} 0 0 0 0 0 0 0 0 2'.format(body.body_id))
            lines.append(str(body.joints.shape[0]))
            lines.extend(
                '{0!r} {1!r} {2!r} 0 0 0 0 0 0 0 0 {3}'.format(
                    float(x), float(y), float(z), int(state),
                )
                for (x, y, z), state in zip(body.joints, body.tracking)
            )
    return '\n'.join(lines) + '\n'


def center_on_root(sequence: SkeletonSequence) -> SkeletonSequence:
    """
    Subtracts the spine base of the first tracked body from every joint.

    Sequences without any tracked body are returned unchanged.
    """
    origin = next(
        (bodies[0].joints[0] for bodies in sequence.frames if bodies), None,
    )
    if origin is None:
        return sequence
    return attr.evolve(sequence, frames=tuple(
        tuple(
            attr.evolve(body, joints=body.joints - origin)
            for body in bodies
        )
        for bodies in sequence.frames
    ))


@final
class _LineReader(object):
    """Hands out whitespace separated fields line by line."""

    __slots__ = ('_lines', '_position')

    def __init__(self, text: str) -> None:
        self._lines = text.split('\n')
        if self._lines[-1] == '':
            self._lines.pop()
        self._position = 0

    def fields(self, context: str, expected: str) -> List[str]:
        if self._position >= len(self._lines):
            raise SkeletonParseError(
                '{0}unexpected end of input, expected {1}'.format(
                    context, expected,
                ),
                line=self._position + 1,
            )
        self._position += 1
        return self._lines[self._position - 1].split()

    def count(self, context: str, expected: str) -> int:
        fields = self.fields(context, expected)
        if len(fields) != 1:
            raise self.error(context, 'expected a single {0}'.format(expected))
        try:
            number = int(fields[0])
        except ValueError:
            raise self.error(context, '{0} is not an integer'.format(expected))
        if number < 0:
            raise self.error(context, '{0} is negative'.format(expected))
        return number

    def trailing(self) -> Optional[int]:
        for index in range(self._position, len(self._lines)):
            if self._lines[index].strip():
                return index + 1
        return None

    def error(self, context: str, reason: str) -> SkeletonParseError:
        return SkeletonParseError(context + reason, line=self._position)


def _read_frames(
    reader: _LineReader,
    joints: Optional[int],
) -> Tuple[Tuple[Body, ...], ...]:
    total = reader.count('', 'frame count')
    frames = []
    for frame in range(total):
        context = 'frame {0} of {1}: '.format(frame + 1, total)
        bodies = tuple(
            _read_body(reader, context, joints)
            for _ in range(reader.count(context, 'body count'))
        )
        if bodies and joints is None:
            joints = bodies[0].joints.shape[0]
        frames.append(bodies)

    extra = reader.trailing()
    if extra is not None:
        raise SkeletonParseError(
            'unexpected data after the last frame', line=extra,
        )
    return tuple(frames)


def _read_body(
    reader: _LineReader,
    context: str,
    joints: Optional[int],
) -> Body:
    info = reader.fields(context, 'body info')
    if len(info) != _BODY_INFO_FIELDS:
        raise reader.error(context, 'body info needs {0} fields'.format(
            _BODY_INFO_FIELDS,
        ))
    count = reader.count(context, 'joint count')
    if joints is not None and count != joints:
        raise reader.error(context, 'joint count {0}, expected {1}'.format(
            count, joints,
        ))

    coordinates = []
    tracking = []
    for joint in range(count):
        fields = reader.fields(context, 'joint {0}'.format(joint + 1))
        if len(fields) != _JOINT_FIELDS:
            raise reader.error(context, 'joint line needs {0} fields'.format(
                _JOINT_FIELDS,
            ))
        try:
            values = [float(field) for field in fields[:3]]
            state = int(fields[-1])
        except ValueError:
            raise reader.error(context, 'non-numeric joint field')
        if state not in _TRACKING_STATES:
            raise reader.error(context, 'tracking state outside 0..2')
        if not np.all(np.isfinite(values)):
            raise reader.error(context, 'non-finite joint coordinate')
        coordinates.append(values)
        tracking.append(state)
    return Body(
        body_id=info[0],
        joints=np.array(coordinates, dtype=np.float64).reshape(count, 3),
        tracking=np.array(tracking, dtype=np.int64),
    )
