"""Weighted low-rank matrix factorization kernel.

For a mode matrix ``X`` (m x n), weights ``W`` and factors ``U`` (m x r),
``V`` (n x r) the kernel minimizes::

    J(U, V) = 1/2 ||W * (U V^T - X)||_F^2 + lam_u/2 ||U||_F^2 + lam_v/2 ||V||_F^2

one factor at a time.  Each row of ``V`` (resp. ``U``) is an independent
ridge-regularized weighted least-squares problem whose diagonal weights are
the squared entries of the matching column (resp. row) of ``W``; all of them
are solved in one batched call.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgument

__all__ = [
    "ridge_wls",
    "update_u",
    "update_v",
    "update_weights",
    "weighted_objective",
    "objective_gradients",
    "init_factors",
]

DEFAULT_C = 1.0
DEFAULT_GAMMA = 10.0
DEFAULT_LAMBDA = 1e-3


def _require_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise InvalidArgument("non-finite input to weighted least squares")


def _batched_ridge(design, targets, sq_weights, lam):
    """Solve ``(D^T diag(w_j) D + lam I) x_j = D^T diag(w_j) t_j`` for every column j.

    design : (p, r), targets and sq_weights : (p, q).  Returns (q, r).
    """
    p, r = design.shape
    lo, hi = sq_weights.min(), sq_weights.max()
    if lo == hi:
        # shared Gram matrix
        gram = lo * (design.T @ design)
        gram[np.arange(r), np.arange(r)] += lam
        return np.linalg.solve(gram, lo * (design.T @ targets)).T
    outer = (design[:, :, None] * design[:, None, :]).reshape(p, r * r)
    gram = (sq_weights.T @ outer).reshape(-1, r, r)
    gram[:, np.arange(r), np.arange(r)] += lam
    rhs = (sq_weights * targets).T @ design
    return np.linalg.solve(gram, rhs[:, :, None])[:, :, 0]


def ridge_wls(design, targets, weights, lam: float) -> np.ndarray:
    """Weighted ridge regression for a single right-hand side.

    Returns the minimizer of ``sum_i weights_i (design_i . x - targets_i)^2
    + lam ||x||^2``.  Note ``weights`` enter linearly here; the factor
    updates pass squared entries of ``W``.
    """
    design = np.asarray(design, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if design.ndim != 2 or targets.shape != (design.shape[0],) or weights.shape != targets.shape:
        raise InvalidArgument("design must be p x r with targets and weights of length p")
    if not lam > 0:
        raise InvalidArgument(f"ridge parameter must be positive, got {lam}")
    if np.any(weights < 0):
        raise InvalidArgument("weights must be nonnegative")
    _require_finite(design, targets, weights)
    return _batched_ridge(design, targets[:, None], weights[:, None], lam)[0]


def _check_rank(m, n, r):
    if r > min(m, n):
        raise InvalidArgument(f"rank {r} exceeds min({m}, {n})")


def update_v(U, X, W, lam_v: float) -> np.ndarray:
    """Closed-form V given U: row j of V solves the weighted ridge problem for column j of X."""
    m, n = X.shape
    _check_rank(m, n, U.shape[1])
    if not lam_v > 0:
        raise InvalidArgument("lam_v must be positive")
    return _batched_ridge(U, X, W * W, lam_v)


def update_u(V, X, W, lam_u: float) -> np.ndarray:
    """Closed-form U given V: row i of U solves the weighted ridge problem for row i of X."""
    m, n = X.shape
    _check_rank(m, n, V.shape[1])
    if not lam_u > 0:
        raise InvalidArgument("lam_u must be positive")
    return _batched_ridge(V, X.T, (W * W).T, lam_u)


def update_weights(X, U, V, c: float = DEFAULT_C, gamma: float = DEFAULT_GAMMA,
                   known=None) -> np.ndarray:
    """Element-wise confidence ``c * sqrt(exp(-gamma |X - U V^T|))``.

    Entries flagged in ``known`` are pinned to 1.  Values are clipped below
    at the smallest normal float so weights stay strictly positive.
    """
    if not (c > 0 and gamma > 0):
        raise InvalidArgument(f"c and gamma must be positive, got c={c}, gamma={gamma}")
    resid = np.abs(X - U @ V.T)
    w = c * np.exp(-0.5 * gamma * resid)
    np.maximum(w, np.finfo(np.float64).tiny, out=w)
    if known is not None:
        w[np.asarray(known, dtype=bool)] = 1.0
    return w


def weighted_objective(X, U, V, W, lam_u: float, lam_v: float) -> float:
    R = W * (U @ V.T - X)
    return 0.5 * (float(np.sum(R * R)) + lam_u * float(np.sum(U * U))
                  + lam_v * float(np.sum(V * V)))


def objective_gradients(X, U, V, W, lam_u: float, lam_v: float):
    """Analytic ``(dJ/dU, dJ/dV)`` of :func:`weighted_objective`."""
    G = W * W * (U @ V.T - X)
    return G @ V + lam_u * U, G.T @ U + lam_v * V


def init_factors(m: int, n: int, r: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian factors scaled by ``1/sqrt(r)`` so that ``U V^T`` starts at O(1)."""
    scale = 1.0 / np.sqrt(r)
    U = rng.standard_normal((m, r)) * scale
    V = rng.standard_normal((n, r)) * scale
    return U, V
