"""Report figures written next to the CSV outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "plot_trace",
    "plot_weight_scatter",
    "plot_rse_vs_missing",
    "plot_mode_errors",
]

_SCHEME_STYLE = {
    "twmac-tt": dict(color="tab:red", marker="o"),
    "tmac-tt": dict(color="tab:blue", marker="s"),
}


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_trace(rows, path, title=None):
    """Objective (and RSE when present) against the iteration count."""
    it = [r["iteration"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(it, [r["objective"] for r in rows], color="k", label="objective")
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    rse = [r.get("rse") for r in rows]
    if any(v not in (None, "") for v in rse):
        ax2 = ax.twinx()
        ax2.semilogy(it, rse, color="tab:red", label="RSE")
        ax2.set_ylabel("RSE", color="tab:red")
    if title:
        ax.set_title(title)
    _finish(fig, path)


def plot_weight_scatter(rows, path, max_panels=4):
    """Estimated weight against true absolute error, one panel per sampled iteration."""
    iterations = sorted({r["iteration"] for r in rows})
    if len(iterations) > max_panels:
        pick = np.linspace(0, len(iterations) - 1, max_panels).round().astype(int)
        iterations = [iterations[i] for i in pick]
    fig, axes = plt.subplots(1, len(iterations), figsize=(3.2 * len(iterations), 3.2),
                             squeeze=False, sharey=True)
    for ax, it in zip(axes[0], iterations):
        sel = [r for r in rows if r["iteration"] == it]
        ax.scatter([r["abs_error"] for r in sel], [r["weight"] for r in sel], s=4,
                   color="tab:red", alpha=0.6)
        ax.set_title(f"iteration {it}")
        ax.set_xlabel("absolute error")
    axes[0][0].set_ylabel("estimated weight")
    _finish(fig, path)


def plot_rse_vs_missing(rows, path, title=None):
    """RSE against missing rate, one line per scheme."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for scheme in sorted({r["scheme"] for r in rows}):
        sel = sorted((r for r in rows if r["scheme"] == scheme), key=lambda r: r["missing_rate"])
        ax.semilogy([r["missing_rate"] for r in sel], [r["rse"] for r in sel],
                    label=scheme, **_SCHEME_STYLE.get(scheme, {}))
    ax.set_xlabel("missing rate")
    ax.set_ylabel("RSE")
    ax.legend()
    if title:
        ax.set_title(title)
    _finish(fig, path)


def plot_mode_errors(profiles, path):
    """Per-mode absolute errors of sampled missing entries.

    ``profiles`` maps iteration -> (mode numbers, list of error arrays), entries
    already sorted by the reference mode's error.
    """
    its = sorted(profiles)
    fig, axes = plt.subplots(1, len(its), figsize=(3.4 * len(its), 3.2), squeeze=False)
    for ax, it in zip(axes[0], its):
        modes, errors = profiles[it]
        for k, err in zip(modes, errors):
            ax.plot(np.arange(1, len(err) + 1), err, marker=".", lw=0.8, label=f"mode {k}")
        ax.set_title(f"iteration {it}")
        ax.set_xlabel("sorted entry")
    axes[0][0].set_ylabel("absolute error")
    axes[0][-1].legend(fontsize="small")
    _finish(fig, path)
