"""Risk composers: the scalarizations of the per-task empirical risk vector.

Four variants are supported:

* ``weighted_l1`` -- sum of pi_t * r_t for a simplex weight vector pi
  (uniform pi gives the classical mean-over-tasks objective),
* ``l2``          -- (1/sqrt(T)) * ||r||_2,
* ``max``         -- the worst task's risk,
* ``alpha_minimax`` -- the softened maximum
  min_{b >= 0} b + (1/alpha) * sum_t max(0, r_t - b),
  which interpolates between ``max`` (alpha -> 0) and the scaled mean
  (alpha >= T, where the optimal b is 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, check_risk_vector

_SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class Composer:
    """Selector for one of the four composers.

    ``weights`` is required for ``weighted_l1`` and must lie on the simplex;
    ``alpha`` is required (> 0) for ``alpha_minimax``.
    """

    variant: str
    weights: np.ndarray | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.variant not in ("weighted_l1", "l2", "max", "alpha_minimax"):
            raise ConfigError("unknown composer variant %r" % (self.variant,))
        if self.variant == "weighted_l1":
            if self.weights is None:
                raise ConfigError("weighted_l1 requires a weight vector")
            w = np.asarray(self.weights, dtype=float).ravel()
            if np.any(w < 0) or abs(w.sum() - 1.0) > _SIMPLEX_TOL:
                raise ConfigError("weights must be nonnegative and sum to 1")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)
        if self.variant == "alpha_minimax":
            if self.alpha is None or not self.alpha > 0:
                raise ConfigError("alpha_minimax requires alpha > 0")

    @staticmethod
    def uniform_l1(T: int) -> "Composer":
        return Composer("weighted_l1", weights=np.full(T, 1.0 / T))


@dataclass(frozen=True)
class AlphaMinimaxSolution:
    """Exact solution of the inner 1-D problem over the relaxed maximum b.

    ``xi`` holds the per-task excesses max(0, r_t - b_star) and
    ``value = b_star + xi.sum() / alpha``.
    """

    b_star: float
    xi: np.ndarray
    value: float


def inner_minimize_b(alpha: float, risks) -> AlphaMinimaxSolution:
    """Minimize b + (1/alpha) * sum_t max(0, r_t - b) over b >= 0 exactly.

    The objective is piecewise linear in b with slope
    1 - |{t: r_t > b}| / alpha, nondecreasing in b, so the minimum sits at
    b = 0 or at the smallest risk value where the slope becomes >= 0.
    """
    if not alpha > 0:
        raise ConfigError("alpha must be positive")
    r = check_risk_vector(risks)
    b_star = 0.0
    if np.count_nonzero(r > 0) > alpha:
        # Candidates are the distinct risk values in increasing order; for
        # candidate v the right-slope is 1 - |{r > v}| / alpha.
        values = np.unique(r)
        n_greater = r.size - np.searchsorted(np.sort(r), values, side="right")
        feasible = values[n_greater <= alpha]
        b_star = float(feasible[0])
    xi = np.maximum(0.0, r - b_star)
    value = b_star + float(xi.sum()) / alpha
    return AlphaMinimaxSolution(b_star=b_star, xi=xi, value=value)


def compose(c: Composer, risks) -> float:
    """Scalar value of the composer at the given risk vector."""
    r = check_risk_vector(risks)
    if c.variant == "weighted_l1":
        if c.weights.shape != r.shape:
            raise ConfigError("weight vector length %d != risk vector length %d"
                              % (c.weights.size, r.size))
        return float(c.weights @ r)
    if c.variant == "l2":
        return float(np.linalg.norm(r) / math.sqrt(r.size))
    if c.variant == "max":
        return float(r.max())
    return inner_minimize_b(c.alpha, r).value


def compose_subgradient(c: Composer, risks) -> np.ndarray:
    """A subgradient of ``compose(c, .)`` at the given risk vector.

    Conventions: ``max`` puts all mass on the lowest-index argmax; ``l2``
    returns the zero vector at r = 0; ``alpha_minimax`` assigns 1/alpha to
    every task strictly above b_star and splits the remaining active mass
    (alpha minus the strict count, when b_star > 0) equally over the tasks
    sitting exactly at b_star, which is required for the first-order
    inequality to hold.
    """
    r = check_risk_vector(risks)
    if c.variant == "weighted_l1":
        if c.weights.shape != r.shape:
            raise ConfigError("weight vector length %d != risk vector length %d"
                              % (c.weights.size, r.size))
        return c.weights.copy()
    if c.variant == "l2":
        nrm = np.linalg.norm(r)
        if nrm == 0.0:
            return np.zeros_like(r)
        return r / (math.sqrt(r.size) * nrm)
    if c.variant == "max":
        g = np.zeros_like(r)
        g[int(np.argmax(r))] = 1.0
        return g
    sol = inner_minimize_b(c.alpha, r)
    s = (r > sol.b_star).astype(float)
    if sol.b_star > 0.0:
        ties = r == sol.b_star
        s[ties] = (c.alpha - s.sum()) / np.count_nonzero(ties)
    return s / c.alpha


def default_alpha(T: int, level: float = 0.1) -> float:
    """Harmonic mean of ceil(level*T + 0.5) and ceil(level*T + 1.5).

    With level = 0.1 the relaxed maximum ignores roughly the hardest 10%
    of tasks for large T; level = 0.2 targets the 20% level.
    """
    if T < 1:
        raise ConfigError("T must be >= 1")
    if not 0.0 < level < 1.0:
        raise ConfigError("level must lie in (0, 1)")
    # round() guards against float dust pushing an exact integer past ceil
    k1 = math.ceil(round(level * T + 0.5, 9))
    k2 = math.ceil(round(level * T + 1.5, 9))
    return 2.0 / (1.0 / k1 + 1.0 / k2)
