"""Matplotlib figures written next to the CSV outputs of experiments and reports."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

COLORS = {
    "grid": "#1b9e77",
    "random": "#d95f02",
    "gdfix": "#7570b3",
    "gddyn": "#e7298a",
    "human": "#666666",
}


def _finish(fig, ax, path, title=None):
    if title:
        ax.set_title(title, fontsize=11)
    ax.grid(True, alpha=0.3, linewidth=0.6)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_error_vs_time(curves, path, ylabel="Best-so-far absolute error (s)", title=None, logy=True):
    """Step plot of best-so-far error per algorithm.

    ``curves`` maps an algorithm name to ``(times, values)``.
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for name, (xs, ys) in curves.items():
        pts = [(x, y) for x, y in zip(xs, ys) if math.isfinite(y)]
        if not pts:
            continue
        ax.step(
            [p[0] for p in pts],
            [p[1] for p in pts],
            where="post",
            label=name,
            color=COLORS.get(name.lower()),
            linewidth=1.6,
        )
    ax.set_xlabel("Calibration time (s)")
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("log")
    ax.legend(frameon=False)
    return _finish(fig, ax, path, title)


def plot_subset_study(rows, path, title=None):
    """Best/median/worst full-set MRE per ICD subset cardinality.

    ``rows`` is a list of dicts with keys size, best, median, worst.
    """
    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    sizes = [str(r["size"]) for r in rows]
    x = range(len(rows))
    width = 0.26
    for off, key, color in ((-width, "best", "#1b9e77"), (0, "median", "#7570b3"), (width, "worst", "#d95f02")):
        ax.bar([i + off for i in x], [r[key] for r in rows], width, label=key, color=color)
    ax.set_xticks(list(x))
    ax.set_xticklabels(sizes)
    ax.set_xlabel("Number of ICD values used for calibration")
    ax.set_ylabel("MRE over all ICD values (%)")
    ax.set_yscale("log")
    ax.legend(frameon=False)
    return _finish(fig, ax, path, title)


def plot_granularity(rows, path, title=None):
    """MRE against mean simulation time, one line per algorithm."""
    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    by_algo = {}
    for r in rows:
        by_algo.setdefault(r["algorithm"], []).append((r["sim_time_s"], r["mre_percent"]))
    for name, pts in by_algo.items():
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=name, color=COLORS.get(name))
    ax.set_xscale("log")
    ax.set_xlabel("Mean simulation time per scenario (s)")
    ax.set_ylabel("MRE (%)")
    ax.legend(frameon=False)
    return _finish(fig, ax, path, title)
