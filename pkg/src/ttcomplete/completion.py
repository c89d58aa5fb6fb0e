"""Block coordinate descent drivers for tensor-train completion.

Both drivers factor every mode-k canonical matricization ``X<k> ~ U_k V_k^T``
(k = 1..N-1), refit the factors by weighted alternating least squares and
rebuild the tensor from the per-mode low-rank estimates, keeping observed
entries fixed:

* :func:`tmac_tt` fits every mode matrix of the current iterate unweighted
  and merges the modes with the scalar balance weights ``alpha_k``;
* :func:`twmac_tt` keeps an element-wise weight matrix per mode, refreshed
  from the residual after every factor update, and merges the modes entry
  by entry in proportion to those weights.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import wlrf
from .augment import make_plan
from .errors import DegenerateWeights, InvalidArgument
from .tensor import ModeMatrix, fold_matricize, frobenius_norm, mode_shape

log = logging.getLogger(__name__)

__all__ = [
    "CompletionConfig",
    "CompletionResult",
    "IterationState",
    "UniformWeights",
    "MaskWeights",
    "ResidualWeights",
    "balance_weights",
    "resolve_ranks",
    "aggregate_fold",
    "tmac_tt",
    "twmac_tt",
    "run_pipeline",
    "complete_pipeline",
]

MODE_WEIGHTED = "mode-weighted"
ELEMENT_WEIGHTED = "element-weighted"
_SCHEME_ALIASES = {
    "mode-weighted": MODE_WEIGHTED, "tmac-tt": MODE_WEIGHTED, "tmac": MODE_WEIGHTED,
    "element-weighted": ELEMENT_WEIGHTED, "twmac-tt": ELEMENT_WEIGHTED, "twmac": ELEMENT_WEIGHTED,
}


@dataclass(frozen=True)
class CompletionConfig:
    ranks: tuple | None = None
    r_max: int = 20
    lambda_u: float = wlrf.DEFAULT_LAMBDA
    lambda_v: float = wlrf.DEFAULT_LAMBDA
    c: float = wlrf.DEFAULT_C
    gamma: float = wlrf.DEFAULT_GAMMA
    th: float = 1e-4
    max_iters: int = 300
    scheme: str = ELEMENT_WEIGHTED
    seed: int = 0
    workers: int | None = None
    track_descent: bool = False

    def __post_init__(self):
        scheme = _SCHEME_ALIASES.get(self.scheme)
        if scheme is None:
            raise InvalidArgument(f"unknown scheme {self.scheme!r}")
        object.__setattr__(self, "scheme", scheme)
        if self.ranks is not None:
            object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        if not self.th > 0:
            raise InvalidArgument("threshold th must be positive")
        if self.max_iters < 1 or self.r_max < 1:
            raise InvalidArgument("max_iters and r_max must be positive")
        if not (self.lambda_u > 0 and self.lambda_v > 0):
            raise InvalidArgument("ridge parameters must be positive")
        if not (self.c > 0 and self.gamma > 0):
            raise InvalidArgument("c and gamma must be positive")

    def worker_count(self) -> int:
        if self.workers is not None:
            return max(1, int(self.workers))
        return max(1, int(os.environ.get("TTC_WORKERS", "1")))


@dataclass
class CompletionResult:
    estimate: np.ndarray
    iterations: int
    objective_trace: list
    change_trace: list
    factors: list
    final_weights: list | None = None
    descent_log: list = field(default_factory=list)

    def mode_estimate(self, k: int) -> ModeMatrix:
        """Low-rank estimate ``U_k V_k^T`` of mode k (1-based)."""
        U, V = self.factors[k - 1]
        return ModeMatrix(k, U @ V.T, tuple(self.estimate.shape))


@dataclass
class IterationState:
    """Snapshot handed to the per-iteration callback (arrays are live, do not mutate)."""

    iteration: int
    estimate: np.ndarray
    factors: list
    weights: list
    change: float
    objective: float


class UniformWeights:
    """All-ones weights: every entry of the current iterate is fitted, never updated."""

    def initial(self, known_k):
        return np.ones(known_k.shape)

    def update(self, Xk, U, V, known_k, W):
        return W


class MaskWeights:
    """Binary weights: 1 on observed entries, 0 elsewhere, never updated."""

    def initial(self, known_k):
        return known_k.astype(np.float64)

    def update(self, Xk, U, V, known_k, W):
        return W


class ResidualWeights:
    """Weights started at 1 and refreshed as ``c sqrt(exp(-gamma |X - U V^T|))``."""

    def __init__(self, c=wlrf.DEFAULT_C, gamma=wlrf.DEFAULT_GAMMA):
        self.c = c
        self.gamma = gamma

    def initial(self, known_k):
        return np.ones(known_k.shape)

    def update(self, Xk, U, V, known_k, W):
        return wlrf.update_weights(Xk, U, V, self.c, self.gamma, known_k)


def balance_weights(dims) -> np.ndarray:
    """``alpha_k = min(m_k, n_k) / sum_j min(m_j, n_j)`` for k = 1..N-1."""
    dims = tuple(dims)
    if len(dims) < 2:
        raise InvalidArgument("balance weights need an order >= 2 tensor")
    xi = np.array([min(mode_shape(dims, k)) for k in range(1, len(dims))], dtype=np.float64)
    return xi / xi.sum()


def resolve_ranks(dims, config: CompletionConfig) -> list:
    """Per-mode ranks: explicit ``config.ranks`` or ``min(m_k, n_k, r_max)``."""
    shapes = [mode_shape(dims, k) for k in range(1, len(dims))]
    if config.ranks is None:
        return [min(m, n, config.r_max) for m, n in shapes]
    ranks = list(config.ranks)
    if len(ranks) == 1 and len(shapes) > 1:
        ranks = ranks * len(shapes)
    if len(ranks) != len(shapes):
        raise InvalidArgument(f"need {len(shapes)} ranks for dims {tuple(dims)}, got {len(ranks)}")
    for k, (r, (m, n)) in enumerate(zip(ranks, shapes), start=1):
        if not 1 <= r <= min(m, n):
            raise InvalidArgument(f"rank {r} of mode {k} outside 1..min({m}, {n})")
    return ranks


def aggregate_fold(approximations, weights, mask, observed) -> np.ndarray:
    """Fold the per-mode estimates into one tensor.

    Missing entries get the weighted mean
    ``sum_k fold(W_k * A_k) / sum_k fold(W_k)``; observed entries keep the
    observed value.  ``weights`` items are mode matrices / arrays shaped like
    the approximations, or scalars.
    """
    mask = np.asarray(mask, dtype=bool)
    observed = np.asarray(observed, dtype=np.float64)
    if observed.shape != mask.shape:
        raise InvalidArgument("observed and mask dims differ")
    num = np.zeros(observed.shape, order="F")
    den = np.zeros(observed.shape, order="F")
    for A, W in zip(approximations, weights, strict=True):
        if not isinstance(A, ModeMatrix) or A.parent_dims != observed.shape:
            raise InvalidArgument("approximations must be mode matrices of the observed tensor")
        if isinstance(W, ModeMatrix):
            W = W.entries
        if np.ndim(W) == 0:
            num += W * fold_matricize(A)
            den += W
        else:
            W = np.asarray(W, dtype=np.float64)
            if W.shape != A.shape:
                raise InvalidArgument(f"weights {W.shape} do not match mode matrix {A.shape}")
            num += fold_matricize(ModeMatrix(A.k, W * A.entries, A.parent_dims))
            den += fold_matricize(ModeMatrix(A.k, W, A.parent_dims))
    missing = ~mask
    if np.any(den[missing] <= 0):
        raise DegenerateWeights("a missing entry has zero total weight across modes")
    out = np.where(mask, observed, 0.0)
    out[missing] = num[missing] / den[missing]
    return np.asfortranarray(out)


def _run_bcd(observed, mask, config, weight_rule, fold_weights, objective_scale, callback):
    observed = np.asarray(observed, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if observed.shape != mask.shape:
        raise InvalidArgument(f"observed {observed.shape} and mask {mask.shape} differ")
    if observed.ndim < 2:
        raise InvalidArgument("completion needs an order >= 2 tensor")
    dims = observed.shape
    nmodes = len(dims) - 1
    ranks = resolve_ranks(dims, config)
    rng = np.random.default_rng(config.seed)

    # observed values on Omega, zeros elsewhere
    X = np.asfortranarray(np.where(mask, observed, 0.0))
    known = [mask.reshape(mode_shape(dims, k), order="F") for k in range(1, nmodes + 1)]
    factors = [wlrf.init_factors(*mode_shape(dims, k), r, rng)
               for k, r in zip(range(1, nmodes + 1), ranks)]
    weights = [weight_rule.initial(kn) for kn in known]
    lam_u, lam_v = config.lambda_u, config.lambda_v

    objective_trace, change_trace, descent_log = [], [], []
    approx = [None] * nmodes
    mode_obj = [0.0] * nmodes
    descent = [None] * nmodes

    def mode_step(i):
        k = i + 1
        Xk = X.reshape(mode_shape(dims, k), order="F")
        U, V = factors[i]
        W = weights[i]
        j0 = wlrf.weighted_objective(Xk, U, V, W, lam_u, lam_v) if config.track_descent else None
        V = wlrf.update_v(U, Xk, W, lam_v)
        j1 = wlrf.weighted_objective(Xk, U, V, W, lam_u, lam_v) if config.track_descent else None
        U = wlrf.update_u(V, Xk, W, lam_u)
        mode_obj[i] = wlrf.weighted_objective(Xk, U, V, W, lam_u, lam_v)
        descent[i] = (j0, j1, mode_obj[i])
        factors[i] = (U, V)
        weights[i] = weight_rule.update(Xk, U, V, known[i], W)
        approx[i] = ModeMatrix(k, U @ V.T, dims)

    workers = min(config.worker_count(), nmodes)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    iteration = 0
    try:
        for iteration in range(1, config.max_iters + 1):
            if pool is None:
                for i in range(nmodes):
                    mode_step(i)
            else:
                list(pool.map(mode_step, range(nmodes)))
            fw = fold_weights if fold_weights is not None else weights
            X_new = aggregate_fold(approx, fw, mask, observed)
            base = frobenius_norm(X)
            change = frobenius_norm(X_new - X) / base if base > 0 else float(frobenius_norm(X_new) > 0)
            X = X_new
            objective_trace.append(float(np.dot(objective_scale, mode_obj)))
            change_trace.append(change)
            if config.track_descent:
                descent_log.extend((iteration, i + 1) + descent[i] for i in range(nmodes))
            if callback is not None:
                callback(IterationState(iteration, X, factors, weights, change,
                                        objective_trace[-1]))
            log.debug("iter %d change %.3e objective %.6e", iteration, change, objective_trace[-1])
            if change < config.th:
                break
    finally:
        if pool is not None:
            pool.shutdown()

    return CompletionResult(
        estimate=X,
        iterations=iteration,
        objective_trace=objective_trace,
        change_trace=change_trace,
        factors=list(factors),
        final_weights=list(weights),
        descent_log=descent_log,
    )


def tmac_tt(observed, mask, config: CompletionConfig | None = None, callback=None, *,
            masked_fit: bool = False) -> CompletionResult:
    """Mode-weighted completion merged with the balance weights ``alpha_k``.

    By default every mode matrix of the current iterate (observed values plus
    the running estimate of the missing ones) is fitted unweighted.  With
    ``masked_fit`` only observed entries enter the fit.
    """
    config = config or CompletionConfig(scheme=MODE_WEIGHTED)
    if config.scheme != MODE_WEIGHTED:
        config = replace(config, scheme=MODE_WEIGHTED)
    alpha = balance_weights(np.shape(observed))
    rule = MaskWeights() if masked_fit else UniformWeights()
    result = _run_bcd(observed, mask, config, rule, list(alpha), alpha, callback)
    result.final_weights = None
    return result


def twmac_tt(observed, mask, config: CompletionConfig | None = None, callback=None, *,
             weight_rule=None, fold_weights=None) -> CompletionResult:
    """Element-wise weighted completion.

    ``weight_rule`` and ``fold_weights`` replace the residual weights and the
    element-wise merge; with ``UniformWeights()`` and the balance weights the
    iteration reduces to :func:`tmac_tt`.
    """
    config = config or CompletionConfig()
    if config.scheme != ELEMENT_WEIGHTED:
        config = replace(config, scheme=ELEMENT_WEIGHTED)
    rule = weight_rule if weight_rule is not None else ResidualWeights(config.c, config.gamma)
    nmodes = np.ndim(observed) - 1
    return _run_bcd(observed, mask, config, rule, fold_weights, np.ones(nmodes), callback)


def _solve(observed, mask, config, callback):
    if config.scheme == MODE_WEIGHTED:
        return tmac_tt(observed, mask, config, callback)
    return twmac_tt(observed, mask, config, callback)


def run_pipeline(data, mask, augmentation: str = "oka", config: CompletionConfig | None = None,
                 reshape_dims=None, callback=None, plan=None):
    """Augment, complete, invert.  Returns ``(estimate, result, plan)``.

    ``data`` may hold arbitrary values at missing positions; they are zeroed
    before augmentation.  The estimate has the dims of ``data`` and equals it
    on every observed entry.  A prebuilt ``plan`` overrides ``augmentation``.
    """
    config = config or CompletionConfig()
    data = np.asarray(data, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if data.shape != mask.shape:
        raise InvalidArgument(f"data {data.shape} and mask {mask.shape} differ")
    observed = np.where(mask, data, 0.0)
    if plan is None:
        plan = make_plan(augmentation, data.shape, reshape_dims)
    aug_obs = np.asfortranarray(plan.apply(observed))
    aug_mask = plan.apply_mask(mask)
    log.info("augmentation %s: %s -> %s (order %d)", augmentation, data.shape,
             aug_obs.shape, aug_obs.ndim)
    result = _solve(aug_obs, aug_mask, config, callback)
    estimate = plan.invert(result.estimate)
    estimate = np.where(mask, data, estimate)
    return estimate, result, plan


def complete_pipeline(data, mask, augmentation: str = "oka",
                      config: CompletionConfig | None = None, reshape_dims=None) -> np.ndarray:
    return run_pipeline(data, mask, augmentation, config, reshape_dims)[0]
