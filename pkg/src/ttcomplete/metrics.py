"""Synthetic low-rank tensors, recovery metrics and weight/error diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.stats import rankdata

from .errors import InvalidArgument
from .tensor import ModeMatrix, matricize

__all__ = [
    "SyntheticSpec",
    "MetricsReport",
    "gen_synthetic",
    "rse",
    "psnr",
    "ssim",
    "score",
    "per_mode_abs_error",
    "weight_error_correlation",
    "mode_error_profile",
]

PSNR_CAP = 100.0


@dataclass(frozen=True)
class SyntheticSpec:
    order: int
    extent: int
    rank: int
    seed: int = 0

    def __post_init__(self):
        if self.order < 3:
            raise InvalidArgument("synthetic tensors need order >= 3")
        if not 1 <= self.rank <= self.extent:
            raise InvalidArgument(f"rank {self.rank} outside 1..{self.extent}")

    @property
    def dims(self):
        return (self.extent,) * self.order


@dataclass(frozen=True)
class MetricsReport:
    rse: float
    psnr: float
    ssim: float


def gen_synthetic(spec: SyntheticSpec, factors=None) -> np.ndarray:
    """Sum of ``rank`` outer products of i.i.d. standard normal factor columns.

    ``factors`` (one ``extent x rank`` matrix per mode) overrides the random draw.
    """
    if factors is None:
        rng = np.random.default_rng(spec.seed)
        factors = [rng.standard_normal((spec.extent, spec.rank)) for _ in range(spec.order)]
    if len(factors) != spec.order:
        raise InvalidArgument("need one factor per mode")
    for F in factors:
        if F.shape != (spec.extent, spec.rank):
            raise InvalidArgument("factor shape must be extent x rank")
    # build the Fortran-ordered tensor as a Khatri-Rao chain: X<1> = U_1 (U_N kr ... kr U_2)^T
    rows = np.ones((1, spec.rank))
    for F in factors[1:]:
        rows = (F[:, None, :] * rows[None, :, :]).reshape(-1, spec.rank)
    unfolded = factors[0] @ rows.T
    return np.asfortranarray(unfolded.reshape(spec.dims, order="F"))


def rse(estimate, truth) -> float:
    """Relative error ``||estimate - truth||_F / ||truth||_F``."""
    truth = np.asarray(truth, dtype=np.float64)
    den = np.linalg.norm(truth.ravel())
    if den == 0:
        raise InvalidArgument("relative error of an all-zero truth is undefined")
    return float(np.linalg.norm((np.asarray(estimate) - truth).ravel()) / den)


def psnr(estimate, truth, peak: float = 1.0) -> float:
    """``10 log10(peak^2 / MSE)`` in dB, capped at 100 dB for identical inputs."""
    mse = float(np.mean((np.asarray(estimate, dtype=np.float64) - truth) ** 2))
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(peak * peak / mse))


def _ssim_slice(x, y, win, c1, c2):
    wx = sliding_window_view(x, (win, win))
    wy = sliding_window_view(y, (win, win))
    mx = wx.mean(axis=(-2, -1))
    my = wy.mean(axis=(-2, -1))
    vx = wx.var(axis=(-2, -1))
    vy = wy.var(axis=(-2, -1))
    cov = (wx * wy).mean(axis=(-2, -1)) - mx * my
    s = ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    return float(s.mean())


def ssim(estimate, truth, data_range: float = 1.0, win: int = 8) -> float:
    """Mean SSIM over uniform ``win x win`` windows, averaged over frontal slices.

    The first two modes are spatial; all further modes enumerate slices.
    """
    x = np.asarray(estimate, dtype=np.float64)
    y = np.asarray(truth, dtype=np.float64)
    if x.shape != y.shape:
        raise InvalidArgument(f"shape mismatch {x.shape} vs {y.shape}")
    if x.ndim == 1:
        x, y = x[:, None], y[:, None]
    win = min(win, x.shape[0], x.shape[1])
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    xs = x.reshape(x.shape[0], x.shape[1], -1, order="F")
    ys = y.reshape(xs.shape, order="F")
    return float(np.mean([_ssim_slice(xs[:, :, j], ys[:, :, j], win, c1, c2)
                          for j in range(xs.shape[2])]))


def score(estimate, truth, peak: float = 1.0) -> MetricsReport:
    return MetricsReport(rse(estimate, truth), psnr(estimate, truth, peak),
                         ssim(estimate, truth, data_range=peak))


def per_mode_abs_error(truth, mode_estimates, missing=None) -> list:
    """Absolute error ``|T<k> - X<k>|`` for each mode estimate.

    With a ``missing`` mask, entries at observed positions are returned as NaN.
    """
    truth = np.asarray(truth, dtype=np.float64)
    out = []
    for est in mode_estimates:
        if not isinstance(est, ModeMatrix) or est.parent_dims != truth.shape:
            raise InvalidArgument("mode estimates must be mode matrices of the truth tensor")
        delta = np.abs(matricize(truth, est.k).entries - est.entries)
        if missing is not None:
            keep = matricize(np.asarray(missing, dtype=bool), est.k).entries
            delta = np.where(keep, delta, np.nan)
        out.append(ModeMatrix(est.k, delta, est.parent_dims))
    return out


def weight_error_correlation(weights, errors) -> float:
    """Spearman rank correlation (midranks for ties; 0 when either side is constant)."""
    w = np.asarray(weights, dtype=np.float64).ravel()
    e = np.asarray(errors, dtype=np.float64).ravel()
    if w.shape != e.shape or w.size < 2:
        raise InvalidArgument("need two equally long samples of size >= 2")
    rw = rankdata(w) - (w.size + 1) / 2
    re = rankdata(e) - (e.size + 1) / 2
    den = math.sqrt(float(np.dot(rw, rw)) * float(np.dot(re, re)))
    if den == 0:
        return 0.0
    return float(np.dot(rw, re) / den)


def mode_error_profile(truth, mode_estimates, missing, n_entries: int = 50, seed=0,
                       sort_mode: int | None = None):
    """Per-mode absolute errors of randomly chosen missing entries.

    Returns ``(entry_ids, errors)`` where ``errors[k]`` lists the error of mode
    ``mode_estimates[k]`` at each chosen entry (flat Fortran index), sorted by
    the error of ``sort_mode`` (default: the most balanced mode) ascending.
    """
    truth = np.asarray(truth, dtype=np.float64)
    missing = np.asarray(missing, dtype=bool)
    candidates = np.flatnonzero(missing.ravel(order="F"))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(candidates, size=min(n_entries, candidates.size), replace=False)
    errors = []
    for est in mode_estimates:
        tensor_est = est.entries.reshape(est.parent_dims, order="F").ravel(order="F")
        errors.append(np.abs(truth.ravel(order="F")[chosen] - tensor_est[chosen]))
    if sort_mode is None:
        balance = [min(est.shape) for est in mode_estimates]
        sort_idx = int(np.argmax(balance))
    else:
        sort_idx = [est.k for est in mode_estimates].index(sort_mode)
    order = np.argsort(errors[sort_idx], kind="stable")
    return chosen[order], [e[order] for e in errors]
