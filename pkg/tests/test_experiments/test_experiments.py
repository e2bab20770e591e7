import pytest

from lstcmda.augment import AugmentConfig
from lstcmda.data.modality import MODALITIES
from lstcmda.ensemble import ENSEMBLES
from lstcmda.experiments import run_ablation, run_ensemble
from lstcmda.model import ToyModelConfig
from lstcmda.train import TrainConfig

_SMALL_TRAIN = TrainConfig(epochs=2, batch_size=8, warmup_epochs=0)


def test_ablation_rows():
    """Ensures that both downsampling layers are scored for each seed."""
    report = run_ablation(
        ToyModelConfig(embed_channels=4, frames=16, joints=4),
        _SMALL_TRAIN,
        AugmentConfig.disabled(),
        seeds=(0, 1),
        n_per_class=6,
    ).unwrap()

    assert [row.seed for row in report.rows] == [0, 1]
    assert 0 <= report.wins <= 2
    for row in report.rows:
        assert 0 <= row.lstc_acc <= 1
        assert 0 <= row.tconv_acc <= 1


def test_ensemble_rows():
    """Ensures that every modality and setting is reported."""
    report = run_ensemble(
        ToyModelConfig(embed_channels=4, frames=16, joints=4, n_classes=3),
        _SMALL_TRAIN,
        AugmentConfig.disabled(),
        seeds=(0,),
        n_per_class=5,
    ).unwrap()

    row = report.rows[0]
    assert sorted(row.single) == sorted(MODALITIES)
    assert sorted(row.fused) == sorted(ENSEMBLES)
    assert row.fused['E1'] == row.single['joint']
    assert 0 <= report.median('E4') <= 1
    assert report.median_best_single() == max(row.single.values())


@pytest.mark.slow
def test_lstc_wins_most_seeds():
    """Ensures that LSTC beats plain downsampling on long-range classes."""
    report = run_ablation(
        ToyModelConfig(embed_channels=8, frames=48, joints=4),
        TrainConfig.desk_scale(epochs=60, warmup_epochs=5),
        AugmentConfig.disabled(),
    ).unwrap()

    assert report.wins >= 3


@pytest.mark.slow
def test_joint_bone_ensemble_keeps_up():
    """Ensures that two fused streams match the best single stream."""
    report = run_ensemble(
        ToyModelConfig(embed_channels=8, frames=16, joints=5, n_classes=4),
        TrainConfig.desk_scale(epochs=40, warmup_epochs=4),
        AugmentConfig(),
    ).unwrap()

    assert report.median('E2') >= report.median_best_single() - 0.01
