"""Matplotlib figures written next to the delimited reports.

Figures are built on bare ``Figure`` objects (no pyplot state) and saved as
PNG without the software tag so identical inputs give identical files.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

OP_COLORS = {"AND": "#1b9e77", "OR": "#d95f02", "XOR": "#7570b3"}


def new_figure(width: float = 6.0, height: float | None = None) -> Figure:
    if height is None:
        height = width * 0.618
    fig = Figure(figsize=(width, height), dpi=100)
    FigureCanvasAgg(fig)
    return fig


def style_axes(ax, xlabel: str = "", ylabel: str = "", title: str = "") -> None:
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=10)
    for side in ("top", "right"):
        ax.spines[side].set_visible(False)
    ax.tick_params(labelsize=8)


def save(fig: Figure, path) -> None:
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})


def plot_score_histogram(scores: np.ndarray, thresholds: Mapping[float, float], path, genuine: np.ndarray | None = None) -> None:
    fig = new_figure()
    ax = fig.add_subplot(111)
    bins = np.linspace(0, 1, 101)
    ax.hist(scores, bins=bins, color="0.55", label="imposter", density=True)
    if genuine is not None and len(genuine):
        ax.hist(genuine, bins=bins, color="#1f78b4", alpha=0.6, label="genuine", density=True)
    for fmr, tau in sorted(thresholds.items()):
        ax.axvline(tau, lw=0.8, ls="--", color="#e31a1c")
        ax.text(tau, ax.get_ylim()[1] * 0.95, f"{fmr * 100:g}%", rotation=90, fontsize=7, va="top", ha="right")
    style_axes(ax, "fractional Hamming distance", "density", "Score distribution and FMR thresholds")
    ax.legend(fontsize=8, frameon=False)
    save(fig, path)


def plot_wolf_counts(labels: Sequence[str], counts: Sequence[int], path) -> None:
    fig = new_figure()
    ax = fig.add_subplot(111)
    x = np.arange(len(labels))
    ax.bar(x, counts, color="0.4")
    ax.set_xticks(x, labels, rotation=60, fontsize=7, ha="right")
    style_axes(ax, "sample", "false matches", "Selected wolves")
    save(fig, path)


def plot_coverage_curves(curves: Mapping[str, Sequence[tuple[float, float]]], path, title: str = "") -> None:
    """``curves`` maps a series label to (fmr, coverage %) points."""
    fig = new_figure()
    ax = fig.add_subplot(111)
    for label, pts in curves.items():
        if not pts:
            continue
        xs, ys = zip(*sorted(pts))
        op = label.split()[0]
        ax.plot(xs, ys, marker="o", ms=3, lw=1, label=label, color=OP_COLORS.get(op))
    ax.set_xscale("log")
    ax.set_ylim(-2, 102)
    style_axes(ax, "false match rate", "users covered (%)", title)
    ax.legend(fontsize=7, frameon=False)
    save(fig, path)


def plot_density_scatter(densities: Mapping[str, Sequence[float]], path) -> None:
    """Proportion of ones per mixture, grouped by operator."""
    fig = new_figure()
    ax = fig.add_subplot(111)
    for i, (op, vals) in enumerate(densities.items()):
        vals = np.asarray(vals)
        jitter = np.linspace(-0.15, 0.15, len(vals)) if len(vals) > 1 else np.zeros(len(vals))
        ax.scatter(np.full(len(vals), i) + jitter, vals, s=6, color=OP_COLORS.get(op, "0.3"))
    ax.set_xticks(range(len(densities)), list(densities))
    ax.axhline(0.5, lw=0.6, color="0.6")
    ax.set_ylim(0, 1)
    style_axes(ax, "operator", "fraction of ones", "Mixture code density")
    save(fig, path)


def plot_trace(traces: Mapping[str, Sequence[int]], path) -> None:
    fig = new_figure()
    ax = fig.add_subplot(111)
    for op, cov in traces.items():
        ax.step(range(1, len(cov) + 1), cov, where="post", label=op, color=OP_COLORS.get(op))
    style_axes(ax, "accepted step", "training coverage", "Hill-climb trace")
    ax.legend(fontsize=8, frameon=False)
    save(fig, path)


def plot_heatmaps(maps: Mapping[str, np.ndarray], path) -> None:
    fig = new_figure(7.0, 1.6 * len(maps) + 0.6)
    for i, (title, m) in enumerate(maps.items(), 1):
        ax = fig.add_subplot(len(maps), 1, i)
        im = ax.imshow(m, cmap="viridis", vmin=0, vmax=1, aspect="auto", interpolation="nearest")
        ax.set_title(title, fontsize=9)
        ax.tick_params(labelsize=7)
        fig.colorbar(im, ax=ax, fraction=0.03)
    save(fig, path)
