"""
AdamW, warmup-cosine learning rate and global norm clipping.

Everything here is a pure function over ``name -> array`` mappings.
"""

import math
from typing import Dict, Mapping, Tuple

import attr
import numpy as np
from returns.result import Failure, Result, Success
from typing_extensions import final

from lstcmda.primitives.exceptions import ConfigurationError, TrainingError

Arrays = Dict[str, np.ndarray]


@final
@attr.s(frozen=True, slots=True, auto_attribs=True)
class Schedule(object):
    """Linear warmup from ``lr_start`` to ``lr_peak``, then cosine to zero."""

    lr_start: float = 1e-7
    lr_peak: float = 1e-3
    warmup_steps: int = 0

    def __attrs_post_init__(self) -> None:
        """Warmup has to climb."""
        if not 0 <= self.lr_start < self.lr_peak:
            raise ConfigurationError('need 0 <= lr_start < lr_peak')
        if self.warmup_steps < 0:
            raise ConfigurationError('warmup_steps must not be negative')


@final
@attr.s(frozen=True, slots=True, auto_attribs=True)
class AdamConfig(object):
    """Decoupled weight decay Adam hyperparameters."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.1


@final
@attr.s(frozen=True, slots=True, auto_attribs=True, eq=False)
class AdamState(object):
    """Step count and moment estimates per parameter."""

    step: int
    first: Arrays
    second: Arrays

    @classmethod
    def zeros(cls, params: Mapping[str, np.ndarray]) -> 'AdamState':
        """State before the first update."""
        zeros = {name: np.zeros_like(array) for name, array in params.items()}
        return cls(step=0, first=zeros, second=dict(zeros))


def lr_at(step: int, total_steps: int, schedule: Schedule) -> float:
    """
    Learning rate of optimizer step ``step`` out of ``total_steps``.

    .. code:: python

      >>> schedule = Schedule(warmup_steps=10)
      >>> lr_at(0, 100, schedule)
      1e-07
      >>> lr_at(10, 100, schedule)
      0.001
      >>> lr_at(99, 100, schedule)
      0.0

    """
    if not 0 <= step < total_steps:
        raise ConfigurationError('step {0} outside [0, {1})'.format(
            step, total_steps,
        ))
    if step < schedule.warmup_steps:
        climb = schedule.lr_peak - schedule.lr_start
        return schedule.lr_start + climb * step / schedule.warmup_steps
    decay_steps = total_steps - 1 - schedule.warmup_steps
    if decay_steps <= 0:
        return schedule.lr_peak
    progress = (step - schedule.warmup_steps) / decay_steps
    return schedule.lr_peak * 0.5 * (1.0 + math.cos(math.pi * progress))


def adamw_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
    config: AdamConfig,
) -> Tuple[Arrays, AdamState]:
    """
    One AdamW update, weight decay first and then the adaptive step.

    Returns new arrays and leaves the inputs untouched.
    """
    step = state.step + 1
    first_correction = 1.0 - config.beta1 ** step
    second_correction = 1.0 - config.beta2 ** step
    updated: Arrays = {}
    first: Arrays = {}
    second: Arrays = {}
    for name, value in params.items():
        grad = grads[name]
        if grad.shape != value.shape:
            raise ConfigurationError('gradient of {0} has shape {1}'.format(
                name, grad.shape,
            ))
        first[name] = config.beta1 * state.first[name] + (
            1.0 - config.beta1
        ) * grad
        second[name] = config.beta2 * state.second[name] + (
            1.0 - config.beta2
        ) * grad * grad
        decayed = value * (1.0 - lr * config.weight_decay)
        updated[name] = decayed - lr * (first[name] / first_correction) / (
            np.sqrt(second[name] / second_correction) + config.eps
        )
    return updated, AdamState(step=step, first=first, second=second)


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    """L2 norm over every gradient entry."""
    return math.sqrt(sum(float(np.sum(grad * grad)) for grad in grads.values()))


def clip_global_norm(
    grads: Mapping[str, np.ndarray],
    max_norm: float = 1.0,
) -> Result[Tuple[Arrays, float], TrainingError]:
    """
    Scales all gradients together so their global norm is ``<= max_norm``.

    Returns the clipped gradients and the norm before clipping.

    .. code:: python

      >>> import numpy as np
      >>> grads = {'g': np.array([0.0, 4.0])}
      >>> clipped, norm = clip_global_norm(grads).unwrap()
      >>> norm, clipped['g'].tolist()
      (4.0, [0.0, 1.0])

    """
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            return Failure(TrainingError(
                'non-finite gradient in {0}'.format(name),
            ))
    norm = global_norm(grads)
    if norm <= max_norm:
        return Success((dict(grads), norm))
    scale = max_norm / norm
    return Success((
        {name: grad * scale for name, grad in grads.items()},
        norm,
    ))
