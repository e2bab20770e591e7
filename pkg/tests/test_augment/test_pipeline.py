from collections import Counter

import numpy as np
import pytest

from lstcmda.augment import (
    AugmentConfig,
    Sample,
    apply_pipeline,
    one_hot,
    pair_for_mix,
)
from lstcmda.primitives.exceptions import ConfigurationError, ValidationError


def _batch(rng, size, views=3, shape=(1, 4, 25), classes=3):
    return [
        Sample(
            rng.normal(size=shape),
            one_hot(index % classes, classes),
            'view{0}'.format(index % views),
            's{0}'.format(index),
        )
        for index in range(size)
    ]


def test_view_consistent_pairing(lstcmda):
    """Ensures that partners share the view and differ from the sample."""
    batch = _batch(lstcmda.rng(1), 30)
    config = AugmentConfig()

    for seed in range(20):
        pairs = pair_for_mix(batch, config, lstcmda.rng(100 + seed))
        for first, second in pairs:
            assert batch[first].view_group == batch[second].view_group
            assert first != second


def test_lonely_sample_pairs_with_itself(lstcmda):
    """Ensures that the only sample of a view is its own partner."""
    batch = _batch(lstcmda.rng(2), 4, views=4)

    pairs = pair_for_mix(batch, AugmentConfig(), lstcmda.rng(3))

    assert pairs == [(0, 0), (1, 1), (2, 2), (3, 3)]


def test_free_pairing_is_uniform(lstcmda):
    """Ensures that pairing across views reaches every sample."""
    batch = _batch(lstcmda.rng(4), 5, views=5)
    config = AugmentConfig(view_consistent=False)
    rng = lstcmda.rng(5)

    counts = Counter(
        second
        for _ in range(4000)
        for _, second in pair_for_mix(batch, config, rng)
    )

    assert sorted(counts) == [0, 1, 2, 3, 4]
    assert all(abs(count / 20000 - 0.2) < 0.02 for count in counts.values())


def test_view_pairing_is_uniform_over_group_mates(lstcmda):
    """Ensures that every other member of the view group is equally likely."""
    batch = _batch(lstcmda.rng(7), 8, views=2)
    rng = lstcmda.rng(8)
    draws = 6000

    counts = Counter(
        pair_for_mix(batch, AugmentConfig(), rng)[0][1]
        for _ in range(draws)
    )

    assert sorted(counts) == [2, 4, 6]
    assert all(abs(count / draws - 1 / 3) < 0.03 for count in counts.values())


def test_pairing_empty_batch(lstcmda):
    """Ensures that an empty batch cannot be paired."""
    with pytest.raises(ValidationError):
        pair_for_mix([], AugmentConfig(), lstcmda.rng(6))


def test_disabled_pipeline_is_identity(lstcmda):
    """Ensures that zero probabilities keep every sample unchanged."""
    batch = _batch(lstcmda.rng(7), 6)

    augmented = apply_pipeline(batch, AugmentConfig.disabled(), lstcmda.rng(8))

    for before, after in zip(batch, augmented):
        assert np.array_equal(before.x, after.x)
        assert np.array_equal(before.y, after.y)
        assert after.provenance == ()


def test_pipeline_order_and_views(lstcmda):
    """Ensures that operators run temporal, spatial, additive in one view."""
    batch = _batch(lstcmda.rng(9), 12)
    config = AugmentConfig(p_temporal=1, p_spatial=1, p_additive=1)

    augmented = apply_pipeline(batch, config, lstcmda.rng(10))

    for sample in augmented:
        operators = [record.operator for record in sample.provenance]
        assert operators == ['temporal', 'spatial', 'additive']
        assert {record.partner_view for record in sample.provenance} == {
            sample.view_group,
        }
        assert lstcmda.is_label_simplex(sample)


def test_pipeline_forced_weight(lstcmda):
    """Ensures that a forced additive weight of one keeps the sample."""
    batch = _batch(lstcmda.rng(11), 6)
    config = AugmentConfig(p_temporal=0, p_spatial=0, p_additive=1)

    augmented = apply_pipeline(batch, config, lstcmda.rng(12), lam=1.0)

    for before, after in zip(batch, augmented):
        assert np.array_equal(before.x, after.x)
        assert after.provenance[0].weight == 0


def test_pipeline_is_reproducible(lstcmda):
    """Ensures that the same seeds give the same batch."""
    batch = _batch(lstcmda.rng(13), 9)
    config = AugmentConfig(p_temporal=0.5, p_spatial=0.5, rng_seed=3)

    first = apply_pipeline(batch, config, np.random.default_rng(1))
    second = apply_pipeline(batch, config, np.random.default_rng(1))

    for left, right in zip(first, second):
        assert np.array_equal(left.x, right.x)
        assert np.array_equal(left.y, right.y)


def test_operator_frequency(lstcmda):
    """Ensures that each operator fires with its configured probability."""
    rng = lstcmda.rng(14)
    batch = _batch(rng, 100000, views=1, shape=(1, 2, 2))
    config = AugmentConfig(p_temporal=0.5, p_spatial=0, p_additive=0)

    augmented = apply_pipeline(batch, config, rng)

    fired = sum(bool(sample.provenance) for sample in augmented)
    assert abs(fired / len(batch) - 0.5) <= 0.005


def test_empty_batch_passes(lstcmda):
    """Ensures that an empty batch gives an empty result."""
    assert apply_pipeline([], AugmentConfig(), lstcmda.rng(15)) == []


@pytest.mark.parametrize('mapping', [
    {'p_temporal': '1.5'},
    {'p_spatial': '-0.1'},
    {'beta_alpha': '0'},
    {'partition': 'arms'},
    {'partition_parts': '0'},
    {'p_additive': 'often'},
    {'unknown': '1'},
])
def test_config_rejections(mapping):
    """Ensures that invalid ``[augment]`` sections fail."""
    config = AugmentConfig.from_mapping(mapping)

    assert isinstance(config.failure(), ConfigurationError)


def test_config_parses_values():
    """Ensures that section strings become typed fields."""
    config = AugmentConfig.from_mapping({
        'p_temporal': '0.25',
        'view_consistent': 'false',
        'rng_seed': '7',
    }).unwrap()

    assert config.p_temporal == 0.25
    assert config.view_consistent is False
    assert config.rng_seed == 7
