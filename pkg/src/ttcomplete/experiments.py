"""Experiment runner: image/tensor completion runs and the synthetic sweep.

Outputs are CSV files (one header line, comma separated) with matplotlib
figures rendered next to them.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import make_plan
from .completion import CompletionConfig, run_pipeline, tmac_tt, twmac_tt
from .errors import InvalidArgument, UnsupportedShape
from .imageio import input_kind, load_tensor, save_tensor
from .metrics import (MetricsReport, SyntheticSpec, gen_synthetic, psnr, rse, score, ssim,
                      weight_error_correlation)
from .tensor import mode_shape, read_dm1, sample_mask

log = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig",
    "METRICS_HEADER",
    "TraceRecorder",
    "WeightDiagnostics",
    "ModeErrorRecorder",
    "chain_callbacks",
    "unit_scale",
    "run_experiment",
    "run_synth_bench",
    "load_config_file",
]

METRICS_HEADER = ["dataset", "missing_rate", "scheme", "rse", "psnr", "ssim", "iters", "seconds"]
TRACE_HEADER = ["iteration", "objective", "rse"]
DIAG_HEADER = ["entry_id", "weight", "abs_error", "iteration"]
MODE_ERROR_HEADER = ["iteration", "rank", "entry_id", "mode", "abs_error"]


@dataclass
class ExperimentConfig:
    input: str = ""
    kind: str | None = None
    mask: str | None = None
    missing_rate: float = 0.5
    seed: int = 0
    augment: str = "oka"
    scheme: str = "twmac-tt"
    reshape_dims: tuple | None = None
    ranks: tuple | None = None
    r_max: int = 20
    c: float = 1.0
    gamma: float = 10.0
    lambda_u: float = 1e-3
    lambda_v: float = 1e-3
    th: float = 1e-4
    max_iters: int = 300
    workers: int | None = None
    dataset: str | None = None
    estimate: str | None = None
    metrics_csv: str | None = None
    trace_csv: str | None = None
    diagnostics_csv: str | None = None
    mode_errors_csv: str | None = None
    diag_every: int = 2
    diag_entries: int = 1000
    mode_error_iters: tuple = (1, 4, 7, 80)
    figures: bool = True
    unknown_truth: bool = False

    def __post_init__(self):
        if not self.input:
            raise InvalidArgument("an input path is required")
        if not 0.0 <= self.missing_rate < 1.0:
            raise InvalidArgument(f"missing_rate must lie in [0, 1), got {self.missing_rate}")
        if self.augment not in ("none", "reshape", "ka", "oka"):
            raise InvalidArgument(f"unknown augmentation {self.augment!r}")
        if self.scheme not in ("tmac-tt", "twmac-tt"):
            raise InvalidArgument(f"unknown scheme {self.scheme!r}")

    def completion_config(self) -> CompletionConfig:
        return CompletionConfig(
            ranks=self.ranks, r_max=self.r_max, lambda_u=self.lambda_u,
            lambda_v=self.lambda_v, c=self.c, gamma=self.gamma, th=self.th,
            max_iters=self.max_iters, scheme=self.scheme, seed=self.seed,
            workers=self.workers)


# -- config files --------------------------------------------------------------

def _parse_value(name, text, ftype):
    text = text.strip()
    ftype = str(ftype)
    if text.lower() in ("", "none") and "None" in ftype:
        return None
    if ftype.startswith("bool"):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise InvalidArgument(f"{name}: expected a boolean, got {text!r}")
    try:
        if ftype.startswith("tuple"):
            return tuple(int(v) for v in text.replace(",", " ").split())
        if ftype.startswith("int"):
            return int(text)
        if ftype.startswith("float"):
            return float(text)
    except ValueError:
        raise InvalidArgument(f"{name}: cannot parse {text!r}") from None
    return text


def load_config_file(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    types = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgument(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in types:
            raise InvalidArgument(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, value, types[key])
    return values


# -- per-iteration recorders ---------------------------------------------------

def chain_callbacks(*callbacks):
    active = [cb for cb in callbacks if cb is not None]
    if not active:
        return None

    def run(state):
        for cb in active:
            cb(state)
    return run


def _entry_values(factors, dims, k, entries):
    # (U V^T) at flat Fortran indices without forming the product
    m, _ = mode_shape(dims, k)
    U, V = factors[k - 1]
    rows, cols = entries % m, entries // m
    return np.einsum("ij,ij->i", U[rows], V[cols]), rows, cols


class TraceRecorder:
    """Objective and (optionally) RSE of the inverted estimate per iteration."""

    def __init__(self, plan=None, truth=None, mask=None, scale=1.0):
        self.plan = plan
        self.truth = truth
        self.mask = mask
        self.scale = scale
        self.rows = []

    def __call__(self, state):
        row = {"iteration": state.iteration, "objective": state.objective, "rse": ""}
        if self.truth is not None:
            est = self.plan.invert(state.estimate)
            est = np.where(self.mask, self.truth, est * self.scale)
            row["rse"] = rse(est, self.truth)
        self.rows.append(row)


class WeightDiagnostics:
    """Estimated weights against true per-mode errors on sampled missing entries.

    Samples ``n_entries`` missing positions of the (augmented) tensor once and,
    every ``every`` iterations, records the weight of mode ``mode`` (default:
    the most balanced one) and the absolute error of that mode's low-rank
    estimate at those positions.
    """

    def __init__(self, truth, mask, n_entries=1000, every=2, mode=None, seed=0):
        self.truth = np.asarray(truth, dtype=np.float64)
        missing = np.flatnonzero(~np.asarray(mask, dtype=bool).ravel(order="F"))
        if missing.size == 0:
            raise InvalidArgument("no missing entries to diagnose")
        rng = np.random.default_rng(seed)
        self.entries = np.sort(rng.choice(missing, size=min(n_entries, missing.size),
                                          replace=False))
        dims = self.truth.shape
        if mode is None:
            mode = 1 + int(np.argmax([min(mode_shape(dims, k)) for k in range(1, len(dims))]))
        self.mode = mode
        self.every = every
        self.rows = []
        self._truth_vals = self.truth.ravel(order="F")[self.entries]

    def __call__(self, state):
        if state.iteration % self.every:
            return
        vals, rows, cols = _entry_values(state.factors, self.truth.shape, self.mode, self.entries)
        weights = state.weights[self.mode - 1][rows, cols]
        errors = np.abs(self._truth_vals - vals)
        for e, w, err in zip(self.entries, weights, errors):
            self.rows.append({"entry_id": int(e), "weight": float(w),
                              "abs_error": float(err), "iteration": state.iteration})

    def iterations(self):
        return sorted({r["iteration"] for r in self.rows})

    def correlation(self, iteration=None):
        it = iteration if iteration is not None else self.iterations()[-1]
        sel = [r for r in self.rows if r["iteration"] == it]
        return weight_error_correlation([r["weight"] for r in sel], [r["abs_error"] for r in sel])

    def median_errors(self):
        return [float(np.median([r["abs_error"] for r in self.rows if r["iteration"] == it]))
                for it in self.iterations()]


class ModeErrorRecorder:
    """Per-mode absolute errors of a few missing entries at chosen iterations.

    Entries are sorted by the error of the most balanced mode, ascending.
    """

    def __init__(self, truth, mask, iterations=(1, 4, 7, 80), n_entries=50, seed=0):
        self.truth = np.asarray(truth, dtype=np.float64)
        missing = np.flatnonzero(~np.asarray(mask, dtype=bool).ravel(order="F"))
        rng = np.random.default_rng(seed)
        self.entries = rng.choice(missing, size=min(n_entries, missing.size), replace=False)
        dims = self.truth.shape
        self.modes = list(range(1, len(dims)))
        self.balanced = 1 + int(np.argmax([min(mode_shape(dims, k)) for k in self.modes]))
        self.iterations = set(iterations)
        self.profiles = {}

    def __call__(self, state):
        if state.iteration not in self.iterations:
            return
        truth_vals = self.truth.ravel(order="F")[self.entries]
        errors = [np.abs(truth_vals - _entry_values(state.factors, self.truth.shape, k,
                                                    self.entries)[0]) for k in self.modes]
        order = np.argsort(errors[self.balanced - 1], kind="stable")
        self.profiles[state.iteration] = (self.entries[order], [e[order] for e in errors])

    def rows(self):
        out = []
        for it in sorted(self.profiles):
            entries, errors = self.profiles[it]
            for rank, e in enumerate(entries, start=1):
                for k, err in zip(self.modes, errors):
                    out.append({"iteration": it, "rank": rank, "entry_id": int(e),
                                "mode": k, "abs_error": float(err[rank - 1])})
        return out


def _write_csv(path, header, rows, append=False):
    path = Path(path)
    new = not (append and path.exists() and path.stat().st_size > 0)
    with open(path, "a" if append else "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header, lineterminator="\n", extrasaction="ignore")
        if new:
            writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row[k]) for k in header})


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _figure_path(csv_path, suffix):
    return Path(csv_path).with_name(Path(csv_path).stem + suffix + ".png")


# -- runners -----------------------------------------------------------------

def unit_scale(observed, mask) -> float:
    """Largest observed magnitude; dividing by it puts the data in [-1, 1]."""
    vals = np.abs(np.asarray(observed)[np.asarray(mask, dtype=bool)])
    scale = float(vals.max()) if vals.size else 1.0
    return scale if scale > 0 else 1.0


def run_experiment(cfg: ExperimentConfig) -> MetricsReport | None:
    """Load, mask, complete, write outputs; returns metrics against the unmasked input."""
    kind = input_kind(cfg.input, cfg.kind)
    truth = load_tensor(cfg.input, kind)
    if cfg.mask:
        mask = read_dm1(cfg.mask)
        if mask.shape != truth.shape:
            raise InvalidArgument(f"mask dims {mask.shape} differ from input dims {truth.shape}")
    else:
        mask = sample_mask(truth.shape, cfg.missing_rate, cfg.seed)
    has_truth = not cfg.unknown_truth
    dataset = cfg.dataset or Path(cfg.input).stem

    # images load in [0, 1]; raw tensors are scaled into [-1, 1] for completion
    scale = 1.0 if kind in ("pgm", "ppm") else unit_scale(truth, mask)
    data = truth / scale

    try:
        plan = make_plan(cfg.augment, data.shape, cfg.reshape_dims)
    except UnsupportedShape as exc:
        if cfg.augment == "ka":
            raise UnsupportedShape(
                f"KA failed to increase the order of dims {truth.shape}: {exc}") from None
        raise
    log.info("augmented order %d, dims %s", len(plan.output_dims), plan.output_dims)

    aug_truth = plan.apply(data) if has_truth else None
    aug_mask = plan.apply_mask(mask)
    trace = TraceRecorder(plan, truth if has_truth else None, mask, scale) if cfg.trace_csv else None
    diag = None
    if cfg.diagnostics_csv and has_truth and cfg.scheme == "twmac-tt" and not mask.all():
        diag = WeightDiagnostics(aug_truth, aug_mask, cfg.diag_entries, cfg.diag_every,
                                 seed=cfg.seed)
    modes = None
    if cfg.mode_errors_csv and has_truth and not mask.all():
        modes = ModeErrorRecorder(aug_truth, aug_mask, cfg.mode_error_iters, seed=cfg.seed)

    start = time.perf_counter()
    estimate, result, _ = run_pipeline(data, mask, cfg.augment, cfg.completion_config(),
                                       callback=chain_callbacks(trace, diag, modes), plan=plan)
    seconds = time.perf_counter() - start
    estimate = np.where(mask, truth, estimate * scale)

    if cfg.estimate:
        save_tensor(estimate, cfg.estimate)
    report = None
    if has_truth:
        # PSNR/SSIM on the unit-scaled data, peak 1
        report = MetricsReport(rse(estimate, truth), psnr(estimate / scale, data),
                               ssim(estimate / scale, data))
    if cfg.metrics_csv and report is not None:
        _write_csv(cfg.metrics_csv, METRICS_HEADER, [{
            "dataset": dataset, "missing_rate": cfg.missing_rate,
            "scheme": f"{cfg.scheme}+{cfg.augment}", "rse": report.rse, "psnr": report.psnr,
            "ssim": report.ssim, "iters": result.iterations, "seconds": round(seconds, 3),
        }], append=True)
    if trace is not None:
        _write_csv(cfg.trace_csv, TRACE_HEADER, trace.rows)
        if cfg.figures:
            from .plotting import plot_trace
            plot_trace(trace.rows, _figure_path(cfg.trace_csv, ""), title=dataset)
    if diag is not None:
        _write_csv(cfg.diagnostics_csv, DIAG_HEADER, diag.rows)
        if cfg.figures and diag.rows:
            from .plotting import plot_weight_scatter
            plot_weight_scatter(diag.rows, _figure_path(cfg.diagnostics_csv, ""))
    if modes is not None:
        _write_csv(cfg.mode_errors_csv, MODE_ERROR_HEADER, modes.rows())
        if cfg.figures and modes.profiles:
            from .plotting import plot_mode_errors
            plot_mode_errors({it: ([k for k in modes.modes], errs)
                              for it, (_, errs) in modes.profiles.items()},
                             _figure_path(cfg.mode_errors_csv, ""))
    return report


def run_synth_bench(order=4, extent=20, rank=5, missing_rates=(0.5,), schemes=("tmac-tt", "twmac-tt"),
                    seed=0, out_csv=None, config: CompletionConfig | None = None, figures=True,
                    make_callback=None):
    """Sweep missing rates x schemes on one synthetic tensor; returns the CSV rows.

    The tensor is generated once; each missing rate gets its own mask (seeded
    from ``seed`` and the rate's position) shared by all schemes.  Every
    scheme uses ranks ``rank`` on all modes unless ``config`` sets them.
    The data are divided by the largest observed magnitude before completion.

    ``make_callback(scheme, rate, scaled_truth, mask)`` may return a
    per-iteration callback for that run.  Each row also carries the run's
    ``estimate`` (original scale) and ``mask`` under keys not written to CSV.
    """
    spec = SyntheticSpec(order, extent, rank, seed)
    truth = gen_synthetic(spec)
    base = config or CompletionConfig(seed=seed)
    if base.ranks is None:
        base = dataclasses.replace(base, ranks=(rank,) * (order - 1))
    dataset = f"synth-N{order}-I{extent}-r{rank}"
    rows = []
    for i, rate in enumerate(missing_rates):
        mask = sample_mask(truth.shape, rate, seed + 1 + i)
        scale = unit_scale(truth, mask)
        observed = np.where(mask, truth, 0.0) / scale
        for scheme in schemes:
            solver = {"tmac-tt": tmac_tt, "twmac-tt": twmac_tt}.get(scheme)
            if solver is None:
                raise InvalidArgument(f"unknown scheme {scheme!r}")
            callback = make_callback(scheme, rate, truth / scale, mask) if make_callback else None
            start = time.perf_counter()
            result = solver(observed, mask, base, callback)
            seconds = time.perf_counter() - start
            estimate = np.where(mask, truth, result.estimate * scale)
            rep = score(estimate / scale, truth / scale)
            rows.append({"dataset": dataset, "missing_rate": rate, "scheme": scheme,
                         "rse": rep.rse, "psnr": rep.psnr, "ssim": rep.ssim,
                         "iters": result.iterations, "seconds": round(seconds, 3),
                         "estimate": estimate, "mask": mask, "truth": truth})
            log.info("%s mr=%.2f %s rse=%.3e iters=%d", dataset, rate, scheme, rep.rse,
                     result.iterations)
    if out_csv:
        _write_csv(out_csv, METRICS_HEADER, rows)
        if figures:
            from .plotting import plot_rse_vs_missing
            plot_rse_vs_missing(rows, _figure_path(out_csv, ""), title=dataset)
    return rows
