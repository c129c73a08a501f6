"""Independent oracles for the core operations, plus named property
suites runnable from the CLI.

Every oracle here deliberately recomputes its target by brute force
(grid scans, support enumeration, exhaustive per-axis minimization) so it
shares no code path with the implementation it checks.
"""

from __future__ import annotations

import math

import numpy as np

from . import composition, linalg
from .composition import Composer
from .core import LossKind, MultiTaskDataset, loss, loss_subderivative
from .models import EpConfig
from .solver import SolveConfig, solve
from .theory import default_environment, verify_tail_bound

# ---------------------------------------------------------------------------
# Oracles


def grid_scan_alpha_minimax(alpha: float, risks, step: float = 1e-4):
    """Brute-force scan of b + (1/alpha) * sum max(0, r - b) over b >= 0.

    The grid is the regular lattice of the given step over [0, max(r)];
    risk vectors whose entries sit on that lattice make the scan exact
    (the minimum of the piecewise-linear objective lies on a breakpoint).
    Returns (best value, best b).
    """
    r = np.asarray(risks, dtype=float).ravel()
    grid = np.arange(0.0, r.max() + step, step)
    values = grid + np.sum(np.maximum(0.0, r[None, :] - grid[:, None]), axis=1) / alpha
    i = int(np.argmin(values))
    return float(values[i]), float(grid[i])


def simplex_projection_enumeration(s, radius: float) -> np.ndarray:
    """Exact projection onto {x >= 0, sum x <= radius} by support enumeration.

    For every subset S of coordinates, solve the equality-constrained
    candidate (budget active on S, zeros elsewhere) and the inactive-budget
    candidate, keep the feasible ones, and return the closest to s.
    Exponential in len(s); intended for instances up to ~12 coordinates.
    """
    s = np.asarray(s, dtype=float).ravel()
    n = s.size
    best, best_dist = None, math.inf
    clipped = np.maximum(s, 0.0)
    if clipped.sum() <= radius + 1e-12:
        best, best_dist = clipped, float(np.sum((clipped - s) ** 2))
    for mask in range(1, 1 << n):
        support = np.array([(mask >> j) & 1 for j in range(n)], dtype=bool)
        k = support.sum()
        theta = (s[support].sum() - radius) / k
        x = np.zeros(n)
        x[support] = s[support] - theta
        if np.any(x[support] < -1e-12):
            continue
        x = np.maximum(x, 0.0)
        if x.sum() > radius + 1e-9:
            continue
        dist = float(np.sum((x - s) ** 2))
        if dist < best_dist:
            best, best_dist = x, dist
    return best


def l2_ball_projection_search(v, radius: float, n_iters: int = 200) -> np.ndarray:
    """Projection onto the l2 ball by bisection on the dual multiplier.

    Solves min ||x - v||^2 s.t. ||x|| <= radius through the scalar
    stationarity condition x = v / (1 + lam), lam >= 0, bisecting lam until
    the norm constraint is met; independent of the rescaling formula.
    """
    v = np.asarray(v, dtype=float)
    if np.linalg.norm(v) <= radius:
        return v.copy()
    lo, hi = 0.0, 1.0
    while np.linalg.norm(v / (1.0 + hi)) > radius:
        hi *= 2.0
    for _ in range(n_iters):
        mid = 0.5 * (lo + hi)
        if np.linalg.norm(v / (1.0 + mid)) > radius:
            lo = mid
        else:
            hi = mid
    return v / (1.0 + hi)


def trace_ball_projection_cvxpy(W, radius: float) -> np.ndarray:
    """SDP oracle for the trace-norm ball projection (requires cvxpy)."""
    import cvxpy as cp

    W = np.asarray(W, dtype=float)
    X = cp.Variable(W.shape)
    problem = cp.Problem(cp.Minimize(cp.sum_squares(X - W)),
                         [cp.normNuc(X) <= radius])
    problem.solve(solver=cp.SCS, eps=1e-10, max_iters=200_000)
    return np.asarray(X.value)


def grid_minimize_ep_1d(data: MultiTaskDataset, tau0: float, tau1: float,
                        composer: Composer, kind: LossKind,
                        n_points: int = 1501) -> float:
    """Exhaustive grid minimization of the constrained EP objective, d = 1.

    With d = 1 the norm-ball constraints are intervals, so the feasible
    set is the product grid [-tau0, tau0] x [-tau1, tau1]^T. Every
    composer is coordinatewise monotone in the risk vector, so the grid
    minimum over the product equals the composer applied to the per-task
    grid minima for each shared value; that identity keeps the scan
    exhaustive yet tractable. Returns the minimal objective value.
    """
    assert data.d == 1
    v0_grid = np.linspace(-tau0, tau0, n_points)
    vt_grid = np.linspace(-tau1, tau1, n_points)
    w_grid = v0_grid[:, None] + vt_grid[None, :]  # all (v0, vt) sums
    per_task_min = np.empty((data.T, n_points))
    for t, task in enumerate(data.tasks):
        x = task.X[:, 0]
        preds = w_grid[:, :, None] * x[None, None, :]
        risks = np.mean(loss(kind, preds, task.y[None, None, :]), axis=2)
        per_task_min[t] = risks.min(axis=1)
    values = [composition.compose(composer, per_task_min[:, i])
              for i in range(n_points)]
    return float(np.min(values))


# ---------------------------------------------------------------------------
# Named property suites (used by `mmtl verify`)


def _report(name: str, ok: bool, detail: str = "") -> bool:
    print("%-55s %s %s" % (name, "PASS" if ok else "FAIL", detail))
    return ok


def suite_projections(n_random: int = 200, seed: int = 0) -> bool:
    rng = np.random.default_rng(seed)
    ok = True

    worst = 0.0
    for _ in range(n_random):
        v = rng.standard_normal(rng.integers(1, 7)) * 3.0
        radius = float(rng.uniform(0.2, 3.0))
        ours = linalg.project_l2_ball(v, radius)
        worst = max(worst, float(np.linalg.norm(
            ours - l2_ball_projection_search(v, radius))))
    ok &= _report("l2 ball matches dual-bisection oracle", worst < 1e-6,
                  "max dev %.2e" % worst)

    worst = 0.0
    for _ in range(n_random):
        s = rng.standard_normal(rng.integers(1, 7)) * 2.0
        radius = float(rng.uniform(0.2, 3.0))
        ours = linalg.project_simplex_scaled(s, radius)
        worst = max(worst, float(np.linalg.norm(
            ours - simplex_projection_enumeration(s, radius))))
    ok &= _report("scaled-simplex matches support enumeration", worst < 1e-6,
                  "max dev %.2e" % worst)

    worst = 0.0
    for _ in range(n_random):
        n, m = rng.integers(2, 7), rng.integers(2, 7)
        W = rng.standard_normal((n, m))
        radius = float(rng.uniform(0.3, 3.0))
        P = linalg.project_trace_ball(W, radius)
        S = linalg.svd(P).S
        worst = max(worst, float(S.sum() - radius), 0.0)
        # Diagonal cross-check: projection of a diagonal matrix is the
        # simplex projection of its (absolute) diagonal.
        diag = np.abs(rng.standard_normal(rng.integers(2, 6))) * 2.0
        Pd = linalg.project_trace_ball(np.diag(diag), radius)
        ref = np.diag(simplex_projection_enumeration(diag, radius))
        worst = max(worst, float(np.abs(Pd - ref).max()))
    ok &= _report("trace ball feasible + diagonal oracle", worst < 1e-6,
                  "max dev %.2e" % worst)

    worst = 0.0
    for _ in range(n_random):
        v = rng.standard_normal(5) * 3.0
        w = rng.standard_normal(5) * 3.0
        radius = float(rng.uniform(0.2, 2.0))
        pv = linalg.project_l2_ball(v, radius)
        pw = linalg.project_l2_ball(w, radius)
        worst = max(worst,
                    float(np.linalg.norm(pv - linalg.project_l2_ball(pv, radius))),
                    float(np.linalg.norm(pv - pw) - np.linalg.norm(v - w)))
    ok &= _report("idempotence and non-expansiveness", worst < 1e-10,
                  "max dev %.2e" % worst)
    return ok


def suite_composition(n_random: int = 300, seed: int = 0) -> bool:
    rng = np.random.default_rng(seed)
    ok = True
    worst = 0.0
    for _ in range(n_random):
        T = int(rng.integers(1, 21))
        r = np.round(rng.uniform(0.0, 2.0, size=T), 4)
        alpha = float(rng.uniform(0.1, 2.0 * T))
        sol = composition.inner_minimize_b(alpha, r)
        ref_value, _ = grid_scan_alpha_minimax(alpha, r)
        worst = max(worst, abs(sol.value - ref_value))
        if alpha >= T and sol.b_star != 0.0:
            worst = max(worst, 1.0)
    ok &= _report("alpha-minimax matches 1e-4 grid scan", worst < 1e-6,
                  "max dev %.2e" % worst)

    worst = 0.0
    for _ in range(n_random):
        T = int(rng.integers(2, 11))
        r1 = rng.uniform(0.0, 3.0, size=T)
        r2 = rng.uniform(0.0, 3.0, size=T)
        lam = float(rng.uniform(0.0, 1.0))
        for c in (Composer.uniform_l1(T), Composer("l2"), Composer("max"),
                  Composer("alpha_minimax", alpha=float(rng.uniform(0.1, 2 * T)))):
            mid = composition.compose(c, lam * r1 + (1 - lam) * r2)
            bound = (lam * composition.compose(c, r1)
                     + (1 - lam) * composition.compose(c, r2))
            worst = max(worst, mid - bound)
            g = composition.compose_subgradient(c, r1)
            gap = (composition.compose(c, r2) - composition.compose(c, r1)
                   - g @ (r2 - r1))
            worst = max(worst, -gap)
    ok &= _report("convexity and first-order inequality", worst < 1e-10,
                  "max dev %.2e" % worst)
    return ok


def suite_solver_oracle(n_instances: int = 6, seed: int = 0) -> bool:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n_instances):
        T = int(rng.integers(1, 4))
        tasks = []
        from .core import TaskSample
        for t in range(T):
            m = int(rng.integers(3, 7))
            x = rng.standard_normal((m, 1))
            y = x[:, 0] * rng.uniform(-2, 2) + 0.2 * rng.standard_normal(m)
            tasks.append(TaskSample(t, x, y))
        data = MultiTaskDataset(tuple(tasks), 1)
        tau0, tau1 = float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.3, 1.5))
        composer = (Composer.uniform_l1(T), Composer("l2"), Composer("max"),
                    Composer("alpha_minimax", alpha=float(rng.uniform(0.2, 2 * T))))[i % 4]
        kind = LossKind("squared")
        cfg = SolveConfig(max_iters=4000, step0=0.5, patience=400)
        _, report = solve(data, EpConfig("constrained", tau0=tau0, tau1=tau1),
                          composer, kind, cfg)
        ref = grid_minimize_ep_1d(data, tau0, tau1, composer, kind)
        worst = max(worst, report.best_objective - ref)
    return _report("solver objective vs exhaustive grid", worst < 1e-3,
                   "max excess %.2e" % worst)


def suite_theory() -> bool:
    env = default_environment()
    ok = True
    tails = []
    for T in (25, 50, 100):
        rep = verify_tail_bound(env, T=T, gamma=0.25, delta=0.1,
                                meta_reps=500, seed=7)
        slack = 3.0 * math.sqrt(0.05 * 0.95 / rep.n_usable)
        ok &= _report("tail frequency within bound at T=%d" % T,
                      rep.empirical_tail_freq <= 0.05 + slack,
                      "freq %.3f" % rep.empirical_tail_freq)
        tails.append(rep.mean_tail_estimate)
    ok &= _report("mean tail estimate decreases with T",
                  tails[0] > tails[1] > tails[2],
                  "%.4f > %.4f > %.4f" % tuple(tails))
    return ok


SUITES = {
    "projections": suite_projections,
    "composition": suite_composition,
    "solver_oracle": suite_solver_oracle,
    "theory": suite_theory,
}


def run_suite(name: str) -> bool:
    if name not in SUITES:
        raise KeyError("unknown suite %r (choose from %s)"
                       % (name, sorted(SUITES)))
    return SUITES[name]()
