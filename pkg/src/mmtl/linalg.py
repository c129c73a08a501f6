"""Dense linear-algebra kernel: one-sided Jacobi SVD, PCA, and the
projection / soft-thresholding primitives behind the model constraint sets.

Matrices are plain float ndarrays throughout.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .core import ConfigError, DataError

_JACOBI_TOL = 1e-12
_MAX_SWEEPS = 60


class SvdResult(NamedTuple):
    """Thin SVD A = U @ diag(S) @ V.T with S sorted descending.

    U is (rows, k), V is (cols, k), k = min(rows, cols).
    """

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray


def _jacobi_svd_tall(A: np.ndarray) -> SvdResult:
    # One-sided Jacobi on the columns of A (rows >= cols): rotate column
    # pairs until all pairs are orthogonal, then read off norms.
    n, d = A.shape
    W = A.copy()
    V = np.eye(d)
    for _ in range(_MAX_SWEEPS):
        off = 0.0
        for p in range(d - 1):
            for q in range(p + 1, d):
                app = W[:, p] @ W[:, p]
                aqq = W[:, q] @ W[:, q]
                apq = W[:, p] @ W[:, q]
                if abs(apq) <= _JACOBI_TOL * np.sqrt(app * aqq) or apq == 0.0:
                    continue
                off = max(off, abs(apq) / max(np.sqrt(app * aqq), _JACOBI_TOL))
                tau = (aqq - app) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau)) if tau != 0 else 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = c * t
                wp = W[:, p].copy()
                W[:, p] = c * wp - s * W[:, q]
                W[:, q] = s * wp + c * W[:, q]
                vp = V[:, p].copy()
                V[:, p] = c * vp - s * V[:, q]
                V[:, q] = s * vp + c * V[:, q]
        if off <= _JACOBI_TOL:
            break
    sigma = np.linalg.norm(W, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    W = W[:, order]
    V = V[:, order]
    U = np.zeros_like(W)
    for j in range(d):
        if sigma[j] > _JACOBI_TOL * max(sigma[0], 1.0):
            U[:, j] = W[:, j] / sigma[j]
        else:
            sigma[j] = 0.0
            # Complete U with any unit vector orthogonal to earlier columns.
            u = np.zeros(n)
            for basis in range(n):
                u[:] = 0.0
                u[basis] = 1.0
                u -= U[:, :j] @ (U[:, :j].T @ u)
                nrm = np.linalg.norm(u)
                if nrm > 0.5:
                    U[:, j] = u / nrm
                    break
    return SvdResult(U, sigma, V)


def svd(A) -> SvdResult:
    """Thin SVD via one-sided Jacobi rotations.

    Deterministic sign convention: the first entry of each right singular
    vector with magnitude above 1e-12 is made positive.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise DataError("svd expects a 2-D matrix")
    if not np.all(np.isfinite(A)):
        raise DataError("svd input has non-finite entries")
    if A.shape[0] >= A.shape[1]:
        U, S, V = _jacobi_svd_tall(A)
    else:
        V, S, U = _jacobi_svd_tall(A.T)
    for j in range(V.shape[1]):
        nz = np.flatnonzero(np.abs(V[:, j]) > 1e-12)
        if nz.size and V[nz[0], j] < 0:
            V[:, j] = -V[:, j]
            U[:, j] = -U[:, j]
    return SvdResult(U, S, V)


def project_l2_ball(v, radius: float) -> np.ndarray:
    """Euclidean projection of ``v`` onto the ball of the given radius."""
    if not radius > 0:
        raise ConfigError("radius must be positive")
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if nrm <= radius:
        return v.copy()
    return v * (radius / nrm)


def project_simplex_scaled(s, radius: float) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum(x) <= radius}.

    Sort-and-threshold: if clipping s at zero already satisfies the budget
    the clipped vector is the projection; otherwise the sum constraint is
    active and the solution is max(s - theta, 0) for the usual simplex
    threshold theta.
    """
    if not radius > 0:
        raise ConfigError("radius must be positive")
    s = np.asarray(s, dtype=float).ravel()
    clipped = np.maximum(s, 0.0)
    if clipped.sum() <= radius:
        return clipped
    u = np.sort(s)[::-1]
    cumsum = np.cumsum(u)
    k = np.arange(1, s.size + 1)
    theta_candidates = (cumsum - radius) / k
    rho = np.max(np.flatnonzero(u - theta_candidates > 0))
    theta = theta_candidates[rho]
    return np.maximum(s - theta, 0.0)


def project_trace_ball(W, radius: float) -> np.ndarray:
    """Frobenius-nearest matrix with trace norm (sum of singular values) <= radius."""
    if not radius > 0:
        raise ConfigError("radius must be positive")
    W = np.asarray(W, dtype=float)
    U, S, V = svd(W)
    if S.sum() <= radius:
        return W.copy()
    S_proj = project_simplex_scaled(S, radius)
    return (U * S_proj) @ V.T


def svt(W, threshold: float) -> np.ndarray:
    """Singular value soft-thresholding: the prox of threshold * trace norm."""
    if threshold < 0:
        raise ConfigError("threshold must be nonnegative")
    W = np.asarray(W, dtype=float)
    if threshold == 0.0:
        return W.copy()
    U, S, V = svd(W)
    return (U * np.maximum(S - threshold, 0.0)) @ V.T


def pca_fit_transform(X, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-k PCA of the rows of X (column-mean centered, no variance scaling).

    Returns (projection, reduced) with projection (d, k) holding the top-k
    right singular vectors of the centered matrix and reduced (n, k) the
    projected rows.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if not 1 <= k <= min(n, d):
        raise ConfigError("k must lie in [1, min(n, d)]")
    centered = X - X.mean(axis=0)
    _, _, V = svd(centered)
    projection = V[:, :k]
    return projection, centered @ projection
