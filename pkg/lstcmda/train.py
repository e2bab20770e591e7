"""
Deterministic minibatch training of the toy model.

One optimizer step is::

  shuffle -> augment -> forward -> KL loss -> backward -> clip -> AdamW

Everything is seeded, two runs with the same seeds give identical logs.
"""

import logging
import math
from pathlib import Path
from typing import Any, List, Mapping, Optional, Sequence, Tuple

import attr
import numpy as np
from returns.io import impure_safe
from returns.pipeline import is_successful
from returns.result import Failure, Result, Success
from typing_extensions import Final, final

from lstcmda.augment import AugmentConfig, BodyPartition, Sample, apply_pipeline
from lstcmda.config import config_from_mapping
from lstcmda.data.storage import ScoreSet
from lstcmda.model import ToyModel
from lstcmda.optim import (
    AdamConfig,
    AdamState,
    Schedule,
    adamw_step,
    clip_global_norm,
    lr_at,
)
from lstcmda.primitives.exceptions import (
    ConfigurationError,
    NumericalError,
    TrainingError,
    ValidationError,
)
from lstcmda.tensor import Tensor, backward, kl_loss

#: Header of the metric log.
CSV_COLUMNS: Final = ('epoch', 'lr', 'loss', 'train_acc', 'val_acc')

_EVAL_BATCH: Final = 256

logger = logging.getLogger(__name__)


@final
@attr.s(frozen=True, slots=True, auto_attribs=True)
class TrainConfig(object):
    """
    Optimisation recipe, the defaults are the full-scale values.

    .. code:: python

      >>> TrainConfig().epochs, TrainConfig.desk_scale().batch_size
      (500, 32)

    """

    epochs: int = 500
    batch_size: int = 128
    warmup_epochs: int = 25
    lr_start: float = 1e-7
    lr_peak: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.1
    clip_norm: float = 1.0
    label_smoothing: float = 0.1
    seed: int = 0

    def __attrs_post_init__(self) -> None:
        """Checks the recipe invariants."""
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError('epochs and batch_size must be positive')
        if not 0 <= self.warmup_epochs < self.epochs:
            raise ConfigurationError('need 0 <= warmup_epochs < epochs')
        if not 0 <= self.lr_start < self.lr_peak:
            raise ConfigurationError('need 0 <= lr_start < lr_peak')
        if not 0 <= self.label_smoothing < 1 or self.clip_norm <= 0:
            raise ConfigurationError('bad label_smoothing or clip_norm')

    @classmethod
    def desk_scale(cls, **overrides: Any) -> 'TrainConfig':
        """Recipe shortened for a single desktop core."""
        values = {'epochs': 200, 'batch_size': 32, 'warmup_epochs': 10}
        values.update(overrides)
        return cls(**values)

    @classmethod
    def from_mapping(
        cls,
        mapping: Mapping[str, Any],
    ) -> Result['TrainConfig', ConfigurationError]:
        """Builds the config from a ``[train]`` section."""
        return config_from_mapping(cls, mapping)

    @property
    def adam(self) -> AdamConfig:
        """Optimizer hyperparameters."""
        return AdamConfig(
            beta1=self.beta1,
            beta2=self.beta2,
            weight_decay=self.weight_decay,
        )

    def schedule(self, steps_per_epoch: int) -> Schedule:
        """Learning rate schedule counted in optimizer steps."""
        return Schedule(
            lr_start=self.lr_start,
            lr_peak=self.lr_peak,
            warmup_steps=self.warmup_epochs * steps_per_epoch,
        )


@final
@attr.s(frozen=True, slots=True, auto_attribs=True)
class EpochMetrics(object):
    """One row of the metric log."""

    epoch: int
    lr: float
    loss: float
    train_acc: float
    val_acc: Optional[float]

    def to_row(self) -> str:
        """CSV row, an empty field when there is no validation set."""
        val_acc = '' if self.val_acc is None else repr(self.val_acc)
        return '{0},{1!r},{2!r},{3!r},{4}'.format(
            self.epoch, self.lr, self.loss, self.train_acc, val_acc,
        )


@final
@attr.s(frozen=True, slots=True, auto_attribs=True)
class TrainReport(object):
    """Per-epoch metrics and the number of optimizer steps taken."""

    epochs: Tuple[EpochMetrics, ...]
    steps: int

    @property
    def final(self) -> EpochMetrics:
        """Metrics after the last epoch."""
        return self.epochs[-1]

    def to_csv(self) -> str:
        """The metric log with a header line."""
        rows = [','.join(CSV_COLUMNS)]
        rows.extend(metrics.to_row() for metrics in self.epochs)
        return '\n'.join(rows) + '\n'


@impure_safe
def write_metrics(path: Path, report: TrainReport) -> Path:
    """Writes the metric log as CSV."""
    path.write_text(report.to_csv(), encoding='utf-8')
    return path


def smooth_labels(labels: np.ndarray, smoothing: float) -> np.ndarray:
    """
    Moves ``smoothing`` of the mass uniformly onto all classes.

    .. code:: python

      >>> import numpy as np
      >>> smooth_labels(np.array([[1.0, 0.0]]), 0.5).tolist()
      [[0.75, 0.25]]

    """
    classes = labels.shape[-1]
    return (1.0 - smoothing) * labels + smoothing / classes


def stack_batch(samples: Sequence[Sample]) -> Tuple[np.ndarray, np.ndarray]:
    """Features ``(N, C, T, V)`` and labels ``(N, K)``."""
    return (
        np.stack([sample.x for sample in samples]),
        np.stack([sample.y for sample in samples]),
    )


def predict_logits(
    model: ToyModel,
    samples: Sequence[Sample],
    batch_size: int = _EVAL_BATCH,
) -> np.ndarray:
    """Logits ``(N, K)`` without augmentation."""
    chunks = []
    for start in range(0, len(samples), batch_size):
        features, _ = stack_batch(samples[start:start + batch_size])
        chunks.append(model.forward(Tensor(features)).data)
    return np.concatenate(chunks)


def evaluate(model: ToyModel, samples: Sequence[Sample]) -> float:
    """Top-1 accuracy against the dominant label class."""
    if not samples:
        raise ValidationError('cannot evaluate an empty sample list')
    predicted = np.argmax(predict_logits(model, samples), axis=1)
    truth = np.array([sample.label for sample in samples])
    return float(np.mean(predicted == truth))


def predict_scores(
    model: ToyModel,
    samples: Sequence[Sample],
    modality: str = 'joint',
) -> ScoreSet:
    """Class scores of every sample, ready for score fusion."""
    return ScoreSet(
        scores=predict_logits(model, samples),
        labels=np.array([sample.label for sample in samples], dtype=np.int64),
        sample_ids=[sample.sample_id for sample in samples],
        modality=modality,
    )


def train(  # noqa: WPS211
    model: ToyModel,
    train_samples: Sequence[Sample],
    val_samples: Sequence[Sample],
    augment_config: AugmentConfig,
    train_config: TrainConfig,
    partition: Optional[BodyPartition] = None,
    *,
    lr_override: Optional[float] = None,
) -> Result[TrainReport, TrainingError]:
    """
    Trains ``model`` in place.

    Validation samples are never augmented.
    ``lr_override`` replaces the schedule with a constant learning rate.
    A non-finite loss or gradient stops training at the offending step.
    """
    if not train_samples:
        return Failure(TrainingError('training set is empty'))
    rng = np.random.default_rng(train_config.seed)
    steps_per_epoch = math.ceil(len(train_samples) / train_config.batch_size)
    total_steps = train_config.epochs * steps_per_epoch
    schedule = train_config.schedule(steps_per_epoch)
    state = AdamState.zeros(model.state())

    history: List[EpochMetrics] = []
    step = 0
    for epoch in range(train_config.epochs):
        losses = []
        lr = 0.0
        order = rng.permutation(len(train_samples))
        for start in range(0, len(order), train_config.batch_size):
            batch = apply_pipeline(
                [
                    train_samples[index]
                    for index in order[start:start + train_config.batch_size]
                ],
                augment_config,
                rng,
                partition,
            )
            lr = lr_at(step, total_steps, schedule) if (
                lr_override is None
            ) else lr_override
            outcome = _optimizer_step(model, batch, state, lr, train_config)
            if not is_successful(outcome):
                error = outcome.failure()
                logger.error('training diverged at step %d: %s', step, error)
                return Failure(TrainingError(str(error), step=step))
            loss, state = outcome.unwrap()
            losses.append(loss)
            step += 1
        mean_loss = float(np.mean(losses))
        history.append(_epoch_metrics(
            model, epoch, lr, mean_loss, train_samples, val_samples,
        ))
        logger.info(
            'epoch %d lr %.3e loss %.4f train_acc %.4f val_acc %s',
            epoch,
            lr,
            history[-1].loss,
            history[-1].train_acc,
            history[-1].val_acc,
        )
    return Success(TrainReport(epochs=tuple(history), steps=step))


def _optimizer_step(
    model: ToyModel,
    batch: Sequence[Sample],
    state: AdamState,
    lr: float,
    config: TrainConfig,
) -> Result[Tuple[float, AdamState], TrainingError]:
    features, labels = stack_batch(batch)
    params = model.parameters()
    for tensor in params.values():
        tensor.zero_grad()
    try:
        loss = kl_loss(
            model.forward(Tensor(features)),
            smooth_labels(labels, config.label_smoothing),
        )
        backward(loss)
    except NumericalError as exc:
        return Failure(TrainingError(str(exc)))
    grads = {
        name: (
            np.zeros_like(tensor.data) if tensor.grad is None else tensor.grad
        )
        for name, tensor in params.items()
    }

    def update(clipped: Tuple[Any, float]) -> Tuple[float, AdamState]:
        updated, new_state = adamw_step(
            model.state(), clipped[0], state, lr, config.adam,
        )
        model.load_state(updated)
        return loss.item(), new_state

    return clip_global_norm(grads, config.clip_norm).map(update)


def _epoch_metrics(  # noqa: WPS211
    model: ToyModel,
    epoch: int,
    lr: float,
    loss: float,
    train_samples: Sequence[Sample],
    val_samples: Sequence[Sample],
) -> EpochMetrics:
    return EpochMetrics(
        epoch=epoch,
        lr=lr,
        loss=loss,
        train_acc=evaluate(model, train_samples),
        val_acc=evaluate(model, val_samples) if val_samples else None,
    )
