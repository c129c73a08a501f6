"""MTL and LTL test protocols, task-level cross-validation, and metrics.

MTL evaluates a trained model on the training tasks' test splits; LTL
freezes the learned shared component, adapts to newly drawn tasks on
their train splits only, and evaluates on their test splits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import linalg
from .composition import Composer
from .core import ConfigError, DataError, LossKind, MultiTaskDataset, TaskSample
from .models import AepConfig, AepParams, EpConfig, EpParams, risk_vector
from .solver import SolveConfig, fit_task_components

METRIC_KINDS = ("l2_risk", "rmse", "normalized_mean_rmse", "multiclass_01")

_AEP_RANK_TOL = 1e-6


@dataclass(frozen=True)
class Metrics:
    """Per-task values plus their max and mean aggregates.

    For ``normalized_mean_rmse`` the mean weights each task by its share
    of test points; the other kinds use the plain mean.
    """

    per_task: np.ndarray
    metric_kind: str
    max_risk: float
    mean_risk: float


def _aggregate(per_task: np.ndarray, metric_kind: str,
               sizes: np.ndarray | None = None) -> Metrics:
    if metric_kind not in METRIC_KINDS:
        raise ConfigError("unknown metric kind %r" % (metric_kind,))
    if metric_kind == "normalized_mean_rmse":
        if sizes is None:
            raise ConfigError("normalized_mean_rmse needs task sizes")
        weights = sizes / math.fsum(sizes)
        mean = math.fsum(weights * per_task)
    else:
        mean = math.fsum(per_task) / per_task.size
    return Metrics(per_task=per_task, metric_kind=metric_kind,
                   max_risk=float(np.max(per_task)), mean_risk=float(mean))


def evaluate_mtl(model, test: MultiTaskDataset, kind: LossKind,
                 metric_kind: str = "l2_risk") -> Metrics:
    """Per-task test risks of a trained model, aggregated per metric kind."""
    risks = risk_vector(model, test, kind)
    per_task = np.sqrt(risks) if metric_kind in ("rmse", "normalized_mean_rmse") \
        else risks
    return _aggregate(per_task, metric_kind, test.sizes())


@dataclass(frozen=True)
class LtlProtocol:
    """LTL adaptation settings: optional k for task-level CV."""

    folds: int | None = None

    def __post_init__(self):
        if self.folds is not None and self.folds < 2:
            raise ConfigError("folds must be >= 2")


def _aep_adapt(W_learned: np.ndarray, new_train: MultiTaskDataset,
               kind: LossKind, cfg: SolveConfig) -> AepParams:
    # New-task predictors are confined to the span of the learned W's
    # epsilon-rank right-singular subspace; coefficients are fit per task.
    U, S, V = linalg.svd(np.asarray(W_learned, dtype=float))
    rank = max(1, int(np.count_nonzero(S > _AEP_RANK_TOL * max(S[0], 1e-300))))
    basis = V[:, :rank]  # (d, rank)
    rows = np.zeros((new_train.T, new_train.d))
    for t, task in enumerate(new_train.tasks):
        Z = task.X @ basis
        if kind.variant == "squared":
            coef, *_ = np.linalg.lstsq(Z, task.y, rcond=None)
        else:
            coef = np.zeros(rank)
            best = math.inf
            best_coef = coef.copy()
            for k in range(1, cfg.max_iters + 1):
                margins = (Z @ coef) * task.y
                obj = float(np.mean(np.maximum(0.0, 1.0 - margins)))
                if obj < best:
                    best, best_coef = obj, coef.copy()
                active = margins < 1.0
                g = -(task.y[active] @ Z[active]) / task.m if np.any(active) \
                    else np.zeros(rank)
                coef = coef - cfg.step(k) * g
            coef = best_coef
        rows[t] = basis @ coef
    return AepParams(rows)


def evaluate_ltl(shared, new_tasks: tuple[MultiTaskDataset, MultiTaskDataset],
                 model_config, composer: Composer, kind: LossKind,
                 cfg: SolveConfig, metric_kind: str = "l2_risk") -> Metrics:
    """Adapt the learned shared component to new tasks and score them.

    ``shared`` is the frozen v0 vector for EP or the learned W matrix for
    AEP. Adaptation sees only the train split of ``new_tasks``; per-task
    adaptation is a single-task problem, so ``composer`` is accepted for
    interface symmetry but does not influence it.
    """
    del composer
    new_train, new_test = new_tasks
    if new_train.T != new_test.T or new_train.d != new_test.d:
        raise DataError("LTL train/test datasets disagree on shape")
    if isinstance(model_config, EpConfig):
        shared = np.asarray(shared, dtype=float)
        if shared.shape != (new_train.d,):
            raise DataError("shared component dimension %d != task dimension %d"
                            % (shared.size, new_train.d))
        adapted = fit_task_components(shared, new_train, model_config, kind, cfg)
    elif isinstance(model_config, AepConfig):
        shared = np.asarray(shared, dtype=float)
        if shared.ndim != 2 or shared.shape[1] != new_train.d:
            raise DataError("shared W must be (*, d) with d matching the tasks")
        adapted = _aep_adapt(shared, new_train, kind, cfg)
    else:
        raise ConfigError("model_config must be EpConfig or AepConfig")
    return evaluate_mtl(adapted, new_test, kind, metric_kind)


@dataclass(frozen=True)
class CvMetrics:
    """Fold-averaged metrics with standard deviations."""

    fold_metrics: tuple[Metrics, ...]
    mean_max: float
    std_max: float
    mean_mean: float
    std_mean: float


def task_cv(data: MultiTaskDataset, folds: int,
            runner: Callable[[np.ndarray, np.ndarray], Metrics],
            seed: int = 0) -> CvMetrics:
    """k-fold cross-validation over tasks.

    Task ids are shuffled once (seeded) and split into ``folds``
    contiguous folds; ``runner(train_ids, heldout_ids)`` trains on the
    first group and returns Metrics for the held-out tasks. Every task is
    held out exactly once.
    """
    if not 2 <= folds <= data.T:
        raise ConfigError("folds must lie in [2, T]")
    perm = np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed))).permutation(data.T)
    fold_ids = np.array_split(perm, folds)
    results = []
    for heldout in fold_ids:
        train_ids = np.setdiff1d(perm, heldout)
        results.append(runner(np.sort(train_ids), np.sort(heldout)))
    maxes = np.array([m.max_risk for m in results])
    means = np.array([m.mean_risk for m in results])
    return CvMetrics(fold_metrics=tuple(results),
                     mean_max=float(np.mean(maxes)),
                     std_max=float(np.std(maxes)),
                     mean_mean=float(np.mean(means)),
                     std_mean=float(np.std(means)))


def subset_tasks(data: MultiTaskDataset, ids) -> MultiTaskDataset:
    """Dataset restricted to the given task ids, reindexed to 0..len-1."""
    ids = np.asarray(ids, dtype=int)
    tasks = tuple(TaskSample(i, data.tasks[t].X, data.tasks[t].y)
                  for i, t in enumerate(ids))
    return MultiTaskDataset(tasks, data.d, data.kind)


def multiclass_01(W_pairs: np.ndarray, features: np.ndarray, labels,
                  spec) -> float:
    """Multiclass 0-1 error of the pairwise tournament on test points.

    ``W_pairs`` is the (n_pairs, k) matrix of binary predictors in the
    tournament's feature space; each point's 45 scores are decoded by
    round-robin voting.
    """
    from .data import tournament_decode

    W_pairs = np.asarray(W_pairs, dtype=float)
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if W_pairs.shape[0] != spec.n_pairs:
        raise DataError("expected %d pairwise predictors, got %d"
                        % (spec.n_pairs, W_pairs.shape[0]))
    if features.shape[1] != W_pairs.shape[1]:
        raise DataError("feature dimension mismatch")
    scores = features @ W_pairs.T
    decoded = np.array([tournament_decode(row, spec) for row in scores])
    return float(np.mean(decoded != labels))
