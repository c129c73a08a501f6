"""Deterministic projected / proximal subgradient solver for the composed
objective phi(per-task risks) + regularizer.

Constrained configs take a projection step after each subgradient move;
regularized configs apply the closed-form prox of their penalty (block
shrinkage for EP, singular value thresholding for AEP). Subgradient
methods do not descend monotonically, so the best iterate seen is tracked
and returned.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .composition import Composer, compose, compose_subgradient
from .core import (ConfigError, LossKind, MultiTaskDataset,
                   SolverDivergenceError, loss, loss_subderivative)
from .models import AepConfig, AepParams, EpConfig, EpParams


@dataclass(frozen=True)
class SolveConfig:
    max_iters: int = 2000
    step0: float = 1.0
    step_schedule: str = "inv_sqrt"  # or "constant"
    tol: float = 1e-6
    patience: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if not self.step0 > 0:
            raise ConfigError("step0 must be positive")
        if self.step_schedule not in ("constant", "inv_sqrt"):
            raise ConfigError("step_schedule must be 'constant' or 'inv_sqrt'")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")

    def step(self, k: int) -> float:
        if self.step_schedule == "constant":
            return self.step0
        return self.step0 / math.sqrt(k)


@dataclass
class SolveReport:
    final_objective: float
    best_objective: float
    iterations_run: int
    objective_trace: np.ndarray
    converged: bool


class _Stacked:
    """Tasks padded to a common length with per-example averaging weights.

    ``weights[t]`` holds 1/m_t on task t's real rows and 0 on padding, so a
    weighted sum over axis 1 is the per-task mean. Padded labels are +1 to
    stay valid for the hinge loss; their weight is 0.
    """

    def __init__(self, data: MultiTaskDataset):
        T = data.T
        m_max = max(t.m for t in data.tasks)
        self.X = np.zeros((T, m_max, data.d))
        self.y = np.ones((T, m_max))
        self.weights = np.zeros((T, m_max))
        for t, task in enumerate(data.tasks):
            self.X[t, :task.m] = task.X
            self.y[t, :task.m] = task.y
            self.weights[t, :task.m] = 1.0 / task.m

    def risks(self, task_params: np.ndarray, kind: LossKind) -> np.ndarray:
        preds = np.einsum("tmd,td->tm", self.X, task_params)
        return np.sum(self.weights * loss(kind, preds, self.y), axis=1)

    def grads(self, task_params: np.ndarray, kind: LossKind) -> np.ndarray:
        # Row t: subgradient of task t's mean empirical risk at its predictor.
        preds = np.einsum("tmd,td->tm", self.X, task_params)
        slopes = self.weights * loss_subderivative(kind, preds, self.y)
        return np.einsum("tm,tmd->td", slopes, self.X)


def _check_objective(value: float, iteration: int) -> None:
    if not np.isfinite(value):
        raise SolverDivergenceError(
            "non-finite objective %r at iteration %d" % (value, iteration))


def _check_risks(risks: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(risks)):
        raise SolverDivergenceError("non-finite per-task risks; the step "
                                    "size is too large for this instance")
    return risks


def _write_trace(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "objective", "max_risk", "mean_risk"])
        writer.writerows(rows)


def solve(data: MultiTaskDataset, model_config, composer: Composer,
          kind: LossKind, cfg: SolveConfig, trace_path=None):
    """Minimize compose(composer, risks(params)) + regularizer.

    Returns (params, SolveReport); params is the best iterate by objective.
    The run is fully deterministic given its inputs (all-zeros init, fixed
    step schedule, no randomness).
    """
    if isinstance(model_config, EpConfig):
        return _solve_ep(data, model_config, composer, kind, cfg, trace_path)
    if isinstance(model_config, AepConfig):
        return _solve_aep(data, model_config, composer, kind, cfg, trace_path)
    raise ConfigError("model_config must be EpConfig or AepConfig")


def _run_loop(cfg, objective_and_grads, apply_step, snapshot):
    """Shared iterate loop: track best-by-objective, plateau stopping."""
    trace = []
    trace_rows = []
    best_obj = math.inf
    best_params = None
    last_improve = 0
    converged = False
    k = 0
    for k in range(1, cfg.max_iters + 1):
        obj, risks, grads = objective_and_grads()
        _check_objective(obj, k)
        trace.append(obj)
        trace_rows.append((k, obj, float(np.max(risks)), float(np.mean(risks))))
        if obj < best_obj - cfg.tol:
            last_improve = k
        if obj < best_obj:
            best_obj = obj
            best_params = snapshot()
        if k - last_improve >= cfg.patience:
            converged = True
            break
        apply_step(cfg.step(k), grads)
    return best_obj, best_params, np.array(trace), k, converged, trace_rows


def _solve_ep(data, config, composer, kind, cfg, trace_path):
    stacked = _Stacked(data)
    T, d = data.T, data.d
    v0 = np.zeros(d)
    Vt = np.zeros((T, d))

    def objective_and_grads():
        risks = _check_risks(stacked.risks(v0[None, :] + Vt, kind))
        obj = compose(composer, risks)
        if config.mode == "regularized":
            obj += (config.lam0 * v0 @ v0
                    + (config.lam1 / T) * np.sum(Vt * Vt))
        w = compose_subgradient(composer, risks)
        G = stacked.grads(v0[None, :] + Vt, kind)
        if config.mode == "constrained":
            # With v0 fixed, the composer is coordinatewise monotone and the
            # task blocks have independent feasible balls, so the joint
            # minimum over {v_t} is attained at the per-task risk minimizers.
            # Updating each block with its own (unweighted) risk subgradient
            # therefore targets the same optimum while avoiding the severe
            # underfitting the composer weights cause at large T.
            Gt = G
        else:
            Gt = w[:, None] * G
        return obj, risks, (w @ G, Gt)

    def apply_step(step, grads):
        nonlocal v0, Vt
        g0, Gt = grads
        v0 = v0 - step * g0
        Vt = Vt - step * Gt
        if config.mode == "constrained":
            v0 = linalg.project_l2_ball(v0, config.tau0)
            norms = np.linalg.norm(Vt, axis=1)
            over = norms > config.tau1
            if np.any(over):
                Vt[over] *= (config.tau1 / norms[over])[:, None]
        else:
            v0 = v0 / (1.0 + 2.0 * config.lam0 * step)
            Vt = Vt / (1.0 + 2.0 * (config.lam1 / T) * step)

    best_obj, best, trace, iters, converged, rows = _run_loop(
        cfg, objective_and_grads, apply_step, lambda: (v0.copy(), Vt.copy()))
    if trace_path is not None:
        _write_trace(trace_path, rows)
    report = SolveReport(final_objective=float(trace[-1]),
                         best_objective=float(best_obj),
                         iterations_run=iters,
                         objective_trace=trace,
                         converged=converged)
    return EpParams(best[0], best[1]), report


def _solve_aep(data, config, composer, kind, cfg, trace_path):
    stacked = _Stacked(data)
    W = np.zeros((data.T, data.d))

    def objective_and_grads():
        risks = _check_risks(stacked.risks(W, kind))
        obj = compose(composer, risks)
        if config.mode == "regularized":
            obj += config.lam * linalg.svd(W).S.sum()
        w = compose_subgradient(composer, risks)
        G = stacked.grads(W, kind)
        return obj, risks, w[:, None] * G

    def apply_step(step, grads):
        nonlocal W
        W = W - step * grads
        if config.mode == "constrained":
            W = linalg.project_trace_ball(W, config.r)
        else:
            W = linalg.svt(W, config.lam * step)

    best_obj, best, trace, iters, converged, rows = _run_loop(
        cfg, objective_and_grads, apply_step, lambda: W.copy())
    if trace_path is not None:
        _write_trace(trace_path, rows)
    report = SolveReport(final_objective=float(trace[-1]),
                         best_objective=float(best_obj),
                         iterations_run=iters,
                         objective_trace=trace,
                         converged=converged)
    return AepParams(best), report


def fit_task_components(v0: np.ndarray, data: MultiTaskDataset,
                        config: EpConfig, kind: LossKind,
                        cfg: SolveConfig) -> EpParams:
    """Fit task-specific EP components with the shared component frozen.

    Each task is an independent single-task problem (composition is
    irrelevant per task); all tasks are iterated in lockstep with per-task
    best-iterate tracking. Used for learning-to-learn adaptation.
    """
    stacked = _Stacked(data)
    T, d = data.T, data.d
    v0 = np.asarray(v0, dtype=float)
    if v0.shape != (d,):
        raise ConfigError("shared component dimension %d != data dimension %d"
                          % (v0.size, d))
    Vt = np.zeros((T, d))
    best_obj = np.full(T, np.inf)
    best_Vt = Vt.copy()
    for k in range(1, cfg.max_iters + 1):
        risks = stacked.risks(v0[None, :] + Vt, kind)
        if config.mode == "regularized":
            obj = risks + (config.lam1 / T) * np.sum(Vt * Vt, axis=1)
        else:
            obj = risks
        if not np.all(np.isfinite(obj)):
            raise SolverDivergenceError("non-finite adaptation objective at "
                                        "iteration %d" % k)
        improved = obj < best_obj
        best_obj[improved] = obj[improved]
        best_Vt[improved] = Vt[improved]
        step = cfg.step(k)
        Vt = Vt - step * stacked.grads(v0[None, :] + Vt, kind)
        if config.mode == "constrained":
            norms = np.linalg.norm(Vt, axis=1)
            over = norms > config.tau1
            if np.any(over):
                Vt[over] *= (config.tau1 / norms[over])[:, None]
        else:
            Vt = Vt / (1.0 + 2.0 * (config.lam1 / T) * step)
    return EpParams(v0, best_Vt)
