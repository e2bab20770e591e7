from pathlib import Path

import attr
import numpy as np
import pytest
from returns.io import IOSuccess
from returns.pipeline import is_successful
from returns.unsafe import unsafe_perform_io

from lstcmda.augment import MixRecord
from lstcmda.codec import (
    Container,
    decode,
    encode,
    read_container,
    write_container,
)
from lstcmda.data.skeleton import parse_ntu_skeleton, parse_sample_metadata
from lstcmda.data.storage import (
    ScoreSet,
    read_samples,
    read_scores,
    samples_from_container,
    samples_to_container,
    scores_to_container,
    skeleton_from_container,
    skeleton_to_container,
    write_samples,
)
from lstcmda.data.synthetic import synth_dataset
from lstcmda.primitives.exceptions import DimensionError, ValidationError

_FIXTURE = (
    Path(__file__).resolve().parent.parent /
    'fixtures' / 'S001C002P003R002A013.skeleton'
)


@pytest.mark.parametrize(('fmt', 'suffix'), [
    ('binary', '.bin'),
    ('json', '.json'),
])
def test_samples_on_disk(tmp_path, fmt, suffix):
    """Ensures that samples keep features, labels and provenance."""
    samples = synth_dataset(2, 2, frames=8, joints=3)
    record = MixRecord('additive', 'synth-1-0', 'view0', 0.25)
    samples[0] = attr.evolve(samples[0], provenance=[record])
    path = tmp_path / ('samples' + suffix)

    assert write_samples(path, samples, fmt) == IOSuccess(path)
    restored = unsafe_perform_io(read_samples(path)).unwrap()

    assert [sample.sample_id for sample in restored] == [
        sample.sample_id for sample in samples
    ]
    assert restored[0].provenance == (record,)
    assert np.array_equal(restored[3].x, samples[3].x)
    assert np.array_equal(restored[3].y, samples[3].y)


def test_missing_file_is_an_io_failure(tmp_path):
    """Ensures that a missing file is a failure, not an exception."""
    outcome = unsafe_perform_io(read_samples(tmp_path / 'absent.bin'))

    assert isinstance(outcome.failure(), OSError)


def test_empty_sample_list():
    """Ensures that an empty list cannot be stored."""
    with pytest.raises(ValidationError):
        samples_to_container([])


def test_wrong_kind_is_rejected():
    """Ensures that containers are checked before they are read."""
    container = scores_to_container(ScoreSet(
        np.zeros((1, 2)), np.zeros(1, dtype=np.int64), ['a'],
    ))

    assert not is_successful(samples_from_container(container))
    assert not is_successful(skeleton_from_container(container))


def test_skeleton_container_keeps_the_capture():
    """Ensures that parsed skeletons survive the container."""
    metadata = parse_sample_metadata(_FIXTURE.name).unwrap()
    sequence = parse_ntu_skeleton(
        _FIXTURE.read_text(encoding='ascii'), metadata=metadata,
    ).unwrap()

    container = decode(encode(skeleton_to_container(sequence))).unwrap()
    restored = skeleton_from_container(container).unwrap()

    assert container.meta['name'] == 'S001C002P003R002A013'
    assert restored.metadata == metadata
    assert [len(bodies) for bodies in restored.frames] == [1, 2, 1]
    assert np.array_equal(restored.to_array(), sequence.to_array())
    assert restored.frames[1][1].body_id == sequence.frames[1][1].body_id


def test_scores_on_disk(tmp_path):
    """Ensures that score files keep their modality and ids."""
    scores = ScoreSet(
        np.array([[0.1, 0.9], [0.8, 0.2]]),
        np.array([1, 0]),
        ['a', 'b'],
        modality='bone',
    )
    path = tmp_path / 'bone.scores'
    unsafe_perform_io(
        write_container(path, scores_to_container(scores)),
    ).unwrap()

    restored = unsafe_perform_io(read_scores(path)).unwrap()

    assert restored.modality == 'bone'
    assert restored.sample_ids == ['a', 'b']
    assert np.array_equal(restored.scores, scores.scores)


def test_score_shape_is_checked():
    """Ensures that scores need one row per label."""
    with pytest.raises(DimensionError):
        ScoreSet(np.zeros((2, 3)), np.zeros(3), ['a', 'b', 'c'])


@pytest.mark.parametrize('blob', [
    b'',
    b'\x05\x00\x00\x00\x00\x00\x00\x00{"a":',
    b'\x02\x00\x00\x00\x00\x00\x00\x00{}abc',
    encode(Container({}, {'w': np.ones(2)}))[:-8],
])
def test_corrupt_containers(blob):
    """Ensures that damaged bytes decode to a failure."""
    assert not is_successful(decode(blob))


def test_json_container_is_readable(tmp_path):
    """Ensures that the JSON rendition is chosen by the suffix."""
    path = tmp_path / 'demo.json'
    container = Container({'kind': 'demo'}, {'w': np.arange(4.0).reshape(2, 2)})
    unsafe_perform_io(write_container(path, container, 'json')).unwrap()

    restored = unsafe_perform_io(read_container(path)).unwrap()

    assert '"kind": "demo"' in path.read_text(encoding='utf-8')
    assert restored.arrays['w'].tolist() == [[0.0, 1.0], [2.0, 3.0]]
