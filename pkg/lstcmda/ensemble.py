"""Score level fusion of models trained on different modalities."""

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from returns.result import Failure, Result, Success
from typing_extensions import Final

from lstcmda.data.modality import MODALITIES
from lstcmda.data.storage import ScoreSet
from lstcmda.primitives.exceptions import (
    DimensionError,
    LstcError,
    UsageError,
)

#: Modalities fused by every ensemble setting.
ENSEMBLES: Final[Dict[str, Tuple[str, ...]]] = {
    'E1': ('joint',),
    'E2': ('joint', 'bone'),
    'E4': MODALITIES,
}


def softmax(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax."""
    shifted = scores - scores.max(axis=-1, keepdims=True)
    exponents = np.exp(shifted)
    return exponents / exponents.sum(axis=-1, keepdims=True)


def fused_scores(
    score_sets: Sequence[ScoreSet],
    weights: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """
    Weighted sum of the softmax scores of every set.

    Equal weights are used when ``weights`` is not given.
    """
    if not score_sets:
        raise DimensionError('need at least one score set')
    shape = score_sets[0].scores.shape
    for score_set in score_sets:
        if score_set.scores.shape != shape:
            raise DimensionError('score shapes {0} and {1} differ'.format(
                shape, score_set.scores.shape,
            ))
        if list(score_set.sample_ids) != list(score_sets[0].sample_ids):
            raise DimensionError('score sets cover different samples')
    if weights is None:
        weights = [1.0] * len(score_sets)
    if len(weights) != len(score_sets):
        raise DimensionError('need one weight per score set')
    return sum(
        weight * softmax(score_set.scores)
        for weight, score_set in zip(weights, score_sets)
    )


def ensemble_scores(
    score_sets: Sequence[ScoreSet],
    weights: Optional[Sequence[float]] = None,
) -> Result[np.ndarray, DimensionError]:
    """
    Predicted class of every sample after fusion.

    .. code:: python

      >>> import numpy as np
      >>> from lstcmda.data.storage import ScoreSet
      >>> single = ScoreSet(np.array([[0.1, 2.0]]), np.array([1]), ['a'])
      >>> ensemble_scores([single, single]).unwrap().tolist()
      [1]

    """
    try:
        return Success(np.argmax(fused_scores(score_sets, weights), axis=1))
    except DimensionError as exc:
        return Failure(exc)


def accuracy(predictions: np.ndarray, labels: np.ndarray) -> float:
    """Share of correct predictions."""
    return float(np.mean(np.asarray(predictions) == np.asarray(labels)))


def select_ensemble(
    setting: str,
    score_sets: Sequence[ScoreSet],
) -> Result[List[ScoreSet], LstcError]:
    """
    Picks the score sets of one ensemble setting by their modality.

    Every modality of the setting has to be present exactly once.
    """
    modalities = ENSEMBLES.get(setting)
    if modalities is None:
        return Failure(UsageError('unknown ensemble setting {0!r}'.format(
            setting,
        )))
    present = [score_set.modality for score_set in score_sets]
    if sorted(present) != sorted(modalities):
        return Failure(UsageError(
            '{0} needs modalities {1}, got {2}'.format(
                setting, ', '.join(modalities), ', '.join(present) or 'none',
            ),
        ))
    return Success(list(score_sets))
