"""EP and AEP hypothesis families: parameters, prediction, per-task risks,
regularizers, feasibility projections, and per-task risk gradients.

EP is a linear model with a shared parameter v0 plus task-specific offsets
v_t (prediction <v0 + v_t, x>); AEP stacks one predictor per task as the
rows of a matrix W whose trace norm is penalized or ball-constrained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .core import ConfigError, DataError, LossKind, MultiTaskDataset, loss, loss_subderivative


@dataclass(frozen=True)
class EpParams:
    """Shared parameter v0 (d,) and task-specific matrix Vt (T, d)."""

    v0: np.ndarray
    Vt: np.ndarray

    def __post_init__(self):
        v0 = np.array(self.v0, dtype=float).ravel()
        Vt = np.array(self.Vt, dtype=float)
        if Vt.ndim != 2 or Vt.shape[1] != v0.shape[0]:
            raise DataError("Vt must be (T, d) with d matching v0")
        if not (np.all(np.isfinite(v0)) and np.all(np.isfinite(Vt))):
            raise DataError("EP parameters must be finite")
        v0.setflags(write=False)
        Vt.setflags(write=False)
        object.__setattr__(self, "v0", v0)
        object.__setattr__(self, "Vt", Vt)

    @property
    def T(self) -> int:
        return self.Vt.shape[0]

    @property
    def d(self) -> int:
        return self.v0.shape[0]

    @staticmethod
    def zeros(T: int, d: int) -> "EpParams":
        return EpParams(np.zeros(d), np.zeros((T, d)))


@dataclass(frozen=True)
class AepParams:
    """Stacked task predictors: row t of W is task t's linear predictor."""

    W: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=float)
        if W.ndim != 2:
            raise DataError("W must be a (T, d) matrix")
        if not np.all(np.isfinite(W)):
            raise DataError("AEP parameters must be finite")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def T(self) -> int:
        return self.W.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]

    @staticmethod
    def zeros(T: int, d: int) -> "AepParams":
        return AepParams(np.zeros((T, d)))


@dataclass(frozen=True)
class EpConfig:
    """EP hyperparameters.

    mode "regularized": lam0 * ||v0||^2 + (lam1/T) * sum_t ||v_t||^2;
    mode "constrained": ||v0|| <= tau0 and ||v_t|| <= tau1 per task.
    """

    mode: str
    lam0: float | None = None
    lam1: float | None = None
    tau0: float | None = None
    tau1: float | None = None

    def __post_init__(self):
        if self.mode == "regularized":
            if not (self.lam0 and self.lam0 > 0 and self.lam1 and self.lam1 > 0):
                raise ConfigError("regularized EP needs lam0 > 0 and lam1 > 0")
        elif self.mode == "constrained":
            if not (self.tau0 and self.tau0 > 0 and self.tau1 and self.tau1 > 0):
                raise ConfigError("constrained EP needs tau0 > 0 and tau1 > 0")
        else:
            raise ConfigError("EP mode must be 'regularized' or 'constrained'")


@dataclass(frozen=True)
class AepConfig:
    """AEP hyperparameter: trace-norm weight lam or trace-ball radius r."""

    mode: str
    lam: float | None = None
    r: float | None = None

    def __post_init__(self):
        if self.mode == "regularized":
            if not (self.lam and self.lam > 0):
                raise ConfigError("regularized AEP needs lam > 0")
        elif self.mode == "constrained":
            if not (self.r and self.r > 0):
                raise ConfigError("constrained AEP needs r > 0")
        else:
            raise ConfigError("AEP mode must be 'regularized' or 'constrained'")


def predict(model, task_id: int, x) -> float:
    """Prediction of the given task's predictor at input x."""
    x = np.asarray(x, dtype=float)
    if not 0 <= task_id < model.T:
        raise DataError("unknown task id %d" % task_id)
    if x.shape != (model.d,):
        raise DataError("input dimension %d != model dimension %d"
                        % (x.size, model.d))
    if isinstance(model, EpParams):
        return float((model.v0 + model.Vt[task_id]) @ x)
    return float(model.W[task_id] @ x)


def _task_weights(model) -> np.ndarray:
    # (T, d) matrix of effective per-task predictors.
    if isinstance(model, EpParams):
        return model.v0[None, :] + model.Vt
    return model.W


def risk_vector(model, data: MultiTaskDataset, kind: LossKind) -> np.ndarray:
    """Per-task mean empirical risks under the model."""
    if model.T != data.T or model.d != data.d:
        raise DataError("model shape (T=%d, d=%d) does not match data (T=%d, d=%d)"
                        % (model.T, model.d, data.T, data.d))
    weights = _task_weights(model)
    out = np.empty(data.T)
    for t, task in enumerate(data.tasks):
        preds = task.X @ weights[t]
        out[t] = np.mean(loss(kind, preds, task.y))
    return out


def regularizer_value(model, config) -> float:
    """Value of the penalty term; only defined in regularized mode."""
    if config.mode != "regularized":
        raise ConfigError("regularizer_value requires a regularized config")
    if isinstance(model, EpParams):
        return float(config.lam0 * model.v0 @ model.v0
                     + (config.lam1 / model.T) * np.sum(model.Vt * model.Vt))
    return float(config.lam * linalg.svd(model.W).S.sum())


def project_feasible(model, config):
    """Euclidean projection onto the constraint set; constrained mode only.

    EP constraints form a product of balls, so blockwise projection of v0
    and each v_t is the exact projection.
    """
    if config.mode != "constrained":
        raise ConfigError("project_feasible requires a constrained config")
    if isinstance(model, EpParams):
        v0 = linalg.project_l2_ball(model.v0, config.tau0)
        norms = np.linalg.norm(model.Vt, axis=1)
        scale = np.ones_like(norms)
        over = norms > config.tau1
        scale[over] = config.tau1 / norms[over]
        return EpParams(v0, model.Vt * scale[:, None])
    return AepParams(linalg.project_trace_ball(model.W, config.r))


def risk_gradient_contribution(model, data: MultiTaskDataset, kind: LossKind,
                               task_id: int):
    """Subgradient of task ``task_id``'s empirical risk in parameter space.

    For EP the same (1/m) * sum_i l'(pred_i, y_i) * x_i vector lands in both
    the shared block and the task's own block, returned as a (g_shared,
    g_task) pair. For AEP it occupies row ``task_id`` of a (T, d) direction.
    """
    if not 0 <= task_id < data.T:
        raise DataError("unknown task id %d" % task_id)
    task = data.tasks[task_id]
    w = _task_weights(model)[task_id]
    preds = task.X @ w
    slopes = loss_subderivative(kind, preds, task.y)
    g = (slopes @ task.X) / task.m
    if isinstance(model, EpParams):
        return g, g.copy()
    direction = np.zeros_like(model.W)
    direction[task_id] = g
    return direction
