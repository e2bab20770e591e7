from pathlib import Path

import numpy as np
import pytest
from returns.pipeline import is_successful

from lstcmda.data.skeleton import (
    NTU_JOINTS,
    center_on_root,
    format_ntu_skeleton,
    parse_ntu_skeleton,
    parse_sample_metadata,
)
from lstcmda.primitives.exceptions import SkeletonParseError

_FIXTURES = Path(__file__).resolve().parent.parent / 'fixtures'
_VALID = _FIXTURES / 'S001C002P003R002A013.skeleton'
_ZERO_JOINT = ' '.join(['0'] * 12)


def _valid_text() -> str:
    return _VALID.read_text(encoding='ascii')


def test_parse_fixture():
    """Ensures that the hand fixture parses with all bodies and joints."""
    sequence = parse_ntu_skeleton(_valid_text()).unwrap()

    assert sequence.frame_count == 3
    assert [len(bodies) for bodies in sequence.frames] == [1, 2, 1]
    assert sequence.joint_count == NTU_JOINTS
    assert sequence.to_array().shape == (3, 3, NTU_JOINTS, 2)
    first = sequence.frames[0][0]
    assert first.body_id == '72057594037931101'
    assert first.joints[0].tolist() == [0.2181153, 0.1725972, 3.785547]
    assert first.tracking[3] == 1


def test_bytes_and_text_agree():
    """Ensures that raw bytes parse like decoded text."""
    from_bytes = parse_ntu_skeleton(_VALID.read_bytes()).unwrap()
    from_text = parse_ntu_skeleton(_valid_text()).unwrap()

    assert np.array_equal(from_bytes.to_array(), from_text.to_array())


def test_round_trip():
    """Ensures that formatting and parsing again keeps every coordinate."""
    sequence = parse_ntu_skeleton(_valid_text()).unwrap()

    again = parse_ntu_skeleton(format_ntu_skeleton(sequence)).unwrap()

    assert np.allclose(again.to_array(), sequence.to_array(), atol=1e-6)
    assert [
        [body.tracking.tolist() for body in bodies] for bodies in again.frames
    ] == [
        [body.tracking.tolist() for body in bodies]
        for bodies in sequence.frames
    ]


def test_empty_frames_are_kept():
    """Ensures that frames without bodies stay in the sequence."""
    text = '\n'.join(['2', '0', '1', '5 0 0 0 0 0 0 0 0 2', '1', _ZERO_JOINT])

    sequence = parse_ntu_skeleton(text, joints=1).unwrap()

    assert [len(bodies) for bodies in sequence.frames] == [0, 1]


def test_truncated_file_names_the_line():
    """Ensures that a file cut in the middle reports the missing line."""
    text = (_FIXTURES / 'truncated.skeleton').read_text(encoding='ascii')

    error = parse_ntu_skeleton(text).failure()

    assert isinstance(error, SkeletonParseError)
    assert error.line == 61
    assert str(error).startswith('line 61: frame 2 of 3')


@pytest.mark.parametrize(('text', 'line', 'reason'), [
    ('', 1, 'expected frame count'),
    ('x\n', 1, 'not an integer'),
    ('-1\n', 1, 'negative'),
    ('1\n1\n7 0 0\n', 3, 'body info'),
    ('1\n1\n7 0 0 0 0 0 0 0 0 2\n2\n', 4, 'joint count 2'),
    ('1\n1\n7 0 0 0 0 0 0 0 0 2\n1\n0 0 0\n', 5, 'needs 12 fields'),
    (
        '1\n1\n7 0 0 0 0 0 0 0 0 2\n1\n0 0 nan 0 0 0 0 0 0 0 0 2\n',
        5,
        'non-finite',
    ),
    (
        '1\n1\n7 0 0 0 0 0 0 0 0 2\n1\n0 0 0 0 0 0 0 0 0 0 0 9\n',
        5,
        'tracking state',
    ),
    ('1\n0\n\n3\n', 4, 'after the last frame'),
])
def test_located_errors(text, line, reason):
    """Ensures that malformed input fails with its line and reason."""
    error = parse_ntu_skeleton(text, joints=1).failure()

    assert error.line == line
    assert reason in error.reason


def test_non_ascii_bytes():
    """Ensures that undecodable bytes are reported on their line."""
    error = parse_ntu_skeleton(b'1\n\xff\n', joints=1).failure()

    assert error.line == 2


def test_any_joint_count_when_unset():
    """Ensures that the joint count is free but must stay constant."""
    body = ['7 0 0 0 0 0 0 0 0 2', '2', _ZERO_JOINT, _ZERO_JOINT]
    valid = '\n'.join(['2', '1', *body, '1', *body])
    mixed = '\n'.join(['2', '1', *body, '1', body[0], '1', _ZERO_JOINT])

    assert parse_ntu_skeleton(valid, joints=None).unwrap().joint_count == 2
    assert not is_successful(parse_ntu_skeleton(mixed, joints=None))


@pytest.mark.parametrize(('name', 'fields'), [
    ('S001C002P003R002A013', (1, 2, 3, 2, 13)),
    ('nturgb/S017C003P020R002A060.skeleton', (17, 3, 20, 2, 60)),
])
def test_sample_metadata(name, fields):
    """Ensures that every field of a sample name is decoded."""
    meta = parse_sample_metadata(name).unwrap()

    assert (
        meta.setup, meta.camera, meta.performer, meta.replication, meta.action,
    ) == fields
    assert meta.view_group == 'C{0:03d}'.format(fields[1])


@pytest.mark.parametrize('name', [
    'S1C2P3R2A13',
    'S001C002P003R002',
    'X001C002P003R002A013',
    'S001C002P003R002A013.txt',
])
def test_bad_sample_names(name):
    """Ensures that names off the convention are failures."""
    assert not is_successful(parse_sample_metadata(name))


def test_center_on_root():
    """Ensures that the first spine base becomes the origin."""
    sequence = center_on_root(parse_ntu_skeleton(_valid_text()).unwrap())

    assert np.allclose(sequence.frames[0][0].joints[0], 0.0)
    assert not np.allclose(sequence.frames[1][1].joints[0], 0.0)


def _mutate(text: str, rng: np.random.Generator) -> bytes:
    lines = text.split('\n')
    kind = rng.integers(0, 6)
    index = int(rng.integers(0, len(lines)))
    if kind == 0:
        del lines[index]
    elif kind == 1:
        lines.insert(index, lines[int(rng.integers(0, len(lines)))])
    elif kind == 2:
        fields = lines[index].split() or ['']
        fields[int(rng.integers(0, len(fields)))] = str(rng.choice([
            '', 'x', '-1', '1e309', 'nan', '3.5', '99999999999999999999', '7',
        ]))
        lines[index] = ' '.join(fields)
    elif kind == 3:
        return text.encode('ascii')[:int(rng.integers(0, len(text)))]
    elif kind == 4:
        blob = bytearray(text.encode('ascii'))
        blob[int(rng.integers(0, len(blob)))] = int(rng.integers(0, 256))
        return bytes(blob)
    else:
        lines[index] = lines[index][:int(rng.integers(0, 1 + len(
            lines[index],
        )))]
    return '\n'.join(lines).encode('ascii')


def test_fuzzed_inputs_fail_with_a_location(lstcmda):
    """Ensures that mutated files never crash the parser."""
    text = _valid_text()
    line_count = text.count('\n') + 2
    rng = lstcmda.rng()

    for _ in range(10 ** 4):
        outcome = parse_ntu_skeleton(_mutate(text, rng))
        if not is_successful(outcome):
            error = outcome.failure()
            assert isinstance(error, SkeletonParseError)
            assert 1 <= error.line <= line_count
