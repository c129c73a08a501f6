"""Domain types shared by every other module: tasks, datasets, losses,
and per-task empirical risks.

All types are immutable value objects; arrays are copied on construction
and never mutated afterwards, so instances are safe to share across
threads or worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class DataError(ValueError):
    """Invalid dataset, label, or task content."""


class ConfigError(ValueError):
    """Invalid configuration (bad field values, malformed config files)."""


class SolverDivergenceError(RuntimeError):
    """The optimizer produced a non-finite objective."""


@dataclass(frozen=True)
class LabeledExample:
    """One (x, y) pair; y is real for regression and +/-1 for classification."""

    x: np.ndarray
    y: float

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1 or not np.all(np.isfinite(x)):
            raise DataError("example input must be a finite 1-D vector")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", float(self.y))


@dataclass(frozen=True)
class TaskSample:
    """The m-sample of one task, stored as stacked arrays.

    Attributes
    ----------
    task_id : int
        Index of the task within its dataset.
    X : ndarray, shape (m, d)
        Input instances, one row per example.
    y : ndarray, shape (m,)
        Labels.
    """

    task_id: int
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] < 1:
            raise DataError("task %r needs an (m, d) input matrix with m >= 1"
                            % (self.task_id,))
        if y.shape[0] != X.shape[0]:
            raise DataError("task %r has %d inputs but %d labels"
                            % (self.task_id, X.shape[0], y.shape[0]))
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("task %r contains non-finite values" % (self.task_id,))
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def examples(self) -> list[LabeledExample]:
        return [LabeledExample(x, y) for x, y in zip(self.X, self.y)]

    @staticmethod
    def from_examples(task_id: int, examples: Sequence[LabeledExample]) -> "TaskSample":
        X = np.stack([e.x for e in examples])
        y = np.array([e.y for e in examples])
        return TaskSample(task_id, X, y)


@dataclass(frozen=True)
class MultiTaskDataset:
    """T tasks with a shared input dimension.

    ``kind`` is ``"regression"`` or ``"classification"``; classification
    labels must be +/-1.
    """

    tasks: tuple[TaskSample, ...]
    d: int
    kind: str = "regression"

    def __post_init__(self):
        tasks = tuple(self.tasks)
        if len(tasks) < 1:
            raise DataError("dataset needs at least one task")
        if self.kind not in ("regression", "classification"):
            raise DataError("kind must be 'regression' or 'classification'")
        ids = [t.task_id for t in tasks]
        if ids != list(range(len(tasks))):
            raise DataError("task ids must be 0..T-1 in order, got %r" % (ids,))
        for t in tasks:
            if t.d != self.d:
                raise DataError("task %d has dimension %d, expected %d"
                                % (t.task_id, t.d, self.d))
            if self.kind == "classification" and not np.all(np.isin(t.y, (-1.0, 1.0))):
                raise DataError("classification labels must be +/-1 (task %d)"
                                % t.task_id)
        object.__setattr__(self, "tasks", tasks)

    @property
    def T(self) -> int:
        return len(self.tasks)

    def sizes(self) -> np.ndarray:
        return np.array([t.m for t in self.tasks])


@dataclass(frozen=True)
class LossKind:
    """Loss selector: squared loss for regression, hinge for classification.

    ``clip_bound`` caps the loss at B > 0; only the theory module uses it
    (bounded-loss assumption), training never clips.
    """

    variant: str = "squared"
    clip_bound: float | None = None

    def __post_init__(self):
        if self.variant not in ("squared", "hinge"):
            raise ConfigError("unknown loss variant %r" % (self.variant,))
        if self.clip_bound is not None and not self.clip_bound > 0:
            raise ConfigError("clip_bound must be positive")


def check_risk_vector(values) -> np.ndarray:
    """Validate and return a per-task empirical risk vector (finite, >= 0)."""
    r = np.asarray(values, dtype=float).ravel()
    if r.size < 1:
        raise DataError("risk vector is empty")
    if not np.all(np.isfinite(r)):
        raise DataError("risk vector has non-finite entries")
    if np.any(r < 0):
        raise DataError("risk vector has negative entries")
    return r


def loss(kind: LossKind, prediction, label):
    """Pointwise loss; broadcasts over array inputs.

    squared: (prediction - label)^2; hinge: max(0, 1 - prediction*label).
    Clipped at ``kind.clip_bound`` when set.
    """
    prediction = np.asarray(prediction, dtype=float)
    label = np.asarray(label, dtype=float)
    if kind.variant == "squared":
        out = (prediction - label) ** 2
    else:
        if not np.all(np.isin(label, (-1.0, 1.0))):
            raise DataError("hinge loss requires +/-1 labels")
        out = np.maximum(0.0, 1.0 - prediction * label)
    if kind.clip_bound is not None:
        out = np.minimum(out, kind.clip_bound)
    return out if out.ndim else float(out)


def loss_subderivative(kind: LossKind, prediction, label):
    """d loss / d prediction; at the hinge kink (margin exactly 1) returns 0."""
    prediction = np.asarray(prediction, dtype=float)
    label = np.asarray(label, dtype=float)
    if kind.variant == "squared":
        out = 2.0 * (prediction - label)
    else:
        if not np.all(np.isin(label, (-1.0, 1.0))):
            raise DataError("hinge loss requires +/-1 labels")
        out = np.where(prediction * label < 1.0, -label, 0.0)
    return out if out.ndim else float(out)


def empirical_risk(task: TaskSample, predictor: Callable[[np.ndarray], float],
                   kind: LossKind) -> float:
    """Mean loss of ``predictor`` over the task's m-sample."""
    if task.m < 1:
        raise DataError("empty task")
    preds = np.array([predictor(x) for x in task.X], dtype=float)
    return float(np.mean(loss(kind, preds, task.y)))
