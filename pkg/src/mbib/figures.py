"""Matplotlib rendering for the report paths.

Every figure goes to a file next to the CSV/JSON it illustrates; nothing
here opens a window. The delimited outputs stay canonical, these are the
human-friendly view.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _new_axes(width=4.8, height=3.6):
    fig, ax = plt.subplots(figsize=(width, height), dpi=150)
    ax.grid(True, alpha=0.3, linewidth=0.5)
    return fig, ax


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return str(path)


def scatter_truth_vs_predicted(truth, predicted, path, title=None):
    """Truth on x, prediction on y, reference diagonal dashed."""
    truth = np.asarray(truth, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    fig, ax = _new_axes(4.2, 4.2)
    ax.scatter(truth, predicted, s=8, alpha=0.45, edgecolors="none")
    lo = float(min(truth.min(), predicted.min()))
    hi = float(max(truth.max(), predicted.max()))
    pad = 0.05 * (hi - lo) if hi > lo else 1.0
    ax.plot([lo - pad, hi + pad], [lo - pad, hi + pad], "k--", linewidth=1.0)
    ax.set_xlim(lo - pad, hi + pad)
    ax.set_ylim(lo - pad, hi + pad)
    ax.set_xlabel("truth")
    ax.set_ylabel("predicted")
    if title:
        ax.set_title(title, fontsize=10)
    return _finish(fig, path)


def sweep_heatmap(cell_rows, axis_names, value_key, path, title=None):
    """Mean metric over a 2-axis sweep as an annotated heatmap.

    cell_rows: list of dicts holding both axis values and the metric.
    """
    ax0_vals = sorted({row[axis_names[0]] for row in cell_rows})
    ax1_vals = sorted({row[axis_names[1]] for row in cell_rows})
    grid = np.full((len(ax1_vals), len(ax0_vals)), np.nan)
    for row in cell_rows:
        i = ax1_vals.index(row[axis_names[1]])
        j = ax0_vals.index(row[axis_names[0]])
        grid[i, j] = row[value_key]
    fig, ax = _new_axes(1.2 + 0.9 * len(ax0_vals), 1.0 + 0.8 * len(ax1_vals))
    ax.grid(False)
    im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(ax0_vals)), [f"{v:g}" for v in ax0_vals])
    ax.set_yticks(range(len(ax1_vals)), [f"{v:g}" for v in ax1_vals])
    ax.set_xlabel(axis_names[0])
    ax.set_ylabel(axis_names[1])
    for i in range(len(ax1_vals)):
        for j in range(len(ax0_vals)):
            if np.isfinite(grid[i, j]):
                ax.text(j, i, f"{grid[i, j]:.2f}", ha="center", va="center",
                        fontsize=7, color="white")
    fig.colorbar(im, ax=ax, label=value_key)
    if title:
        ax.set_title(title, fontsize=10)
    return _finish(fig, path)


def sweep_lines(cell_rows, axis_name, value_key, path, title=None):
    """Mean metric over a 1-axis sweep as a line plot."""
    rows = sorted(cell_rows, key=lambda r: r[axis_name])
    x = [r[axis_name] for r in rows]
    y = [r[value_key] for r in rows]
    fig, ax = _new_axes()
    ax.plot(x, y, "o-", markersize=4)
    ax.set_xlabel(axis_name)
    ax.set_ylabel(value_key)
    if len(x) > 1 and min(x) > 0 and max(x) / min(x) > 20:
        ax.set_xscale("log")
    if title:
        ax.set_title(title, fontsize=10)
    return _finish(fig, path)


def rate_loglog(per_n_rows, keys, path, title=None):
    """Concentration curves on log-log axes with reference slopes."""
    fig, ax = _new_axes(5.2, 4.0)
    ns = np.array([row["n"] for row in per_n_rows], dtype=float)
    for key in keys:
        vals = np.array([row[key] for row in per_n_rows], dtype=float)
        ax.loglog(ns, vals, "o-", markersize=4, label=key)
        slope = np.polyfit(np.log(ns), np.log(vals), 1)[0]
        ax.annotate(f"slope {slope:.2f}", (ns[-1], vals[-1]), fontsize=7,
                    textcoords="offset points", xytext=(4, 0))
    ax.set_xlabel("n")
    ax.set_ylabel("mean error")
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title, fontsize=10)
    return _finish(fig, path)
