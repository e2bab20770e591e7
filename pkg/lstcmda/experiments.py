"""
Paired-seed experiments on synthetic data.

:func:`run_ablation` compares LSTC downsampling with a plain stride 2
convolution on the long-range task.
:func:`run_ensemble` trains one model per modality and fuses their scores.
"""

import logging
import statistics
from typing import Dict, Sequence, Tuple

import attr
from returns.pipeline import is_successful
from returns.result import Result, Success
from typing_extensions import Final, final

from lstcmda.augment import AugmentConfig
from lstcmda.data.modality import MODALITIES, JointTopology, with_modality
from lstcmda.data.synthetic import (
    split_by_index,
    synth_dataset,
    synth_long_range_dataset,
)
from lstcmda.ensemble import ENSEMBLES, accuracy, ensemble_scores
from lstcmda.model import ToyModelConfig, build_model
from lstcmda.primitives.exceptions import LstcError
from lstcmda.train import TrainConfig, evaluate, predict_scores, train

#: Paired seeds of the reported experiments.
SEEDS: Final = (0, 1, 2, 3, 4)

logger = logging.getLogger(__name__)


@final
@attr.s(frozen=True, slots=True, auto_attribs=True)
class AblationRow(object):
    """Held-out accuracy of both downsampling layers for one seed."""

    seed: int
    lstc_acc: float
    tconv_acc: float

    @property
    def lstc_wins(self) -> bool:
        """Ties count for LSTC."""
        return self.lstc_acc >= self.tconv_acc


@final
@attr.s(frozen=True, slots=True, auto_attribs=True)
class AblationReport(object):
    """Rows of the LSTC ablation."""

    rows: Tuple[AblationRow, ...]

    @property
    def wins(self) -> int:
        """Seeds where LSTC is at least as accurate."""
        return sum(row.lstc_wins for row in self.rows)


@final
@attr.s(frozen=True, slots=True, auto_attribs=True)
class EnsembleRow(object):
    """Single-modality and fused accuracies for one seed."""

    seed: int
    single: Dict[str, float]
    fused: Dict[str, float]


@final
@attr.s(frozen=True, slots=True, auto_attribs=True)
class EnsembleReport(object):
    """Rows of the modality ensemble experiment."""

    rows: Tuple[EnsembleRow, ...]

    def median(self, setting: str) -> float:
        """Median fused accuracy of an ensemble setting."""
        return statistics.median(row.fused[setting] for row in self.rows)

    def median_best_single(self) -> float:
        """Median over seeds of the best single-modality accuracy."""
        return statistics.median(
            max(row.single.values()) for row in self.rows
        )


def run_ablation(  # noqa: WPS211
    model_config: ToyModelConfig,
    train_config: TrainConfig,
    augment_config: AugmentConfig,
    seeds: Sequence[int] = SEEDS,
    n_per_class: int = 64,
) -> Result[AblationReport, LstcError]:
    """
    Trains both models on the same long-range data for every seed.

    ``model_config`` fixes the shapes, its downsampling field is overridden.
    """
    rows = []
    for seed in seeds:
        split = split_by_index(synth_long_range_dataset(
            n_per_class,
            channels=model_config.in_channels,
            frames=model_config.frames,
            joints=model_config.joints,
            seed=seed,
        ))
        accuracies = {}
        for downsample in ('lstc', 'tconv'):
            model = build_model(attr.evolve(
                model_config, downsample=downsample, seed=seed, n_classes=2,
            ))
            outcome = train(
                model,
                split['train'],
                split['val'],
                augment_config,
                attr.evolve(train_config, seed=seed),
            )
            if not is_successful(outcome):
                return outcome  # type: ignore
            accuracies[downsample] = evaluate(model, split['val'])
        rows.append(AblationRow(
            seed=seed,
            lstc_acc=accuracies['lstc'],
            tconv_acc=accuracies['tconv'],
        ))
        logger.info('ablation seed %d: %s', seed, rows[-1])
    return Success(AblationReport(rows=tuple(rows)))


def run_ensemble(  # noqa: WPS211
    model_config: ToyModelConfig,
    train_config: TrainConfig,
    augment_config: AugmentConfig,
    seeds: Sequence[int] = SEEDS,
    n_per_class: int = 32,
) -> Result[EnsembleReport, LstcError]:
    """Trains one model per modality and fuses them as E1, E2 and E4."""
    topology = JointTopology.chain(model_config.joints)
    rows = []
    for seed in seeds:
        split = split_by_index(synth_dataset(
            model_config.n_classes,
            n_per_class,
            channels=model_config.in_channels,
            frames=model_config.frames,
            joints=model_config.joints,
            seed=seed,
        ))
        scores = {}
        single = {}
        for modality in MODALITIES:
            train_set = with_modality(split['train'], modality, topology)
            val_set = with_modality(split['val'], modality, topology)
            model = build_model(attr.evolve(model_config, seed=seed))
            outcome = train(
                model,
                train_set,
                val_set,
                augment_config,
                attr.evolve(train_config, seed=seed),
            )
            if not is_successful(outcome):
                return outcome  # type: ignore
            scores[modality] = predict_scores(model, val_set, modality)
            single[modality] = evaluate(model, val_set)

        fused = {}
        labels = scores['joint'].labels
        for setting, modalities in ENSEMBLES.items():
            predictions = ensemble_scores(
                [scores[modality] for modality in modalities],
            )
            if not is_successful(predictions):
                return predictions  # type: ignore
            fused[setting] = accuracy(predictions.unwrap(), labels)
        rows.append(EnsembleRow(seed=seed, single=single, fused=fused))
        logger.info('ensemble seed %d: %s', seed, rows[-1])
    return Success(EnsembleReport(rows=tuple(rows)))

