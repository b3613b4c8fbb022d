"""Figure rendering for results CSVs.

Five figure kinds cover the study's plot types: plain scatters,
scatters with a least-squares trendline, mean-fairness histograms,
scatters coloured by fairness bin, and side-by-side comparisons of two
result sets. All numeric annotations are recomputed from the CSV at
render time.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .data import bin_indices, column, least_squares, read_table

KINDS = ("scatter", "scatter-trend", "histogram", "bin-scatter", "compare")


@dataclass
class PlotSpec:
    inputs: list[str]
    kind: str
    x: str
    y: str
    out: str
    bins: list[float] = field(default_factory=list)
    bin_field: str = "f_bar"
    title: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.inputs:
            raise ValueError("need at least one input CSV")
        if self.kind == "compare" and len(self.inputs) != 2:
            raise ValueError("compare takes exactly two input CSVs")
        if self.kind in ("histogram", "bin-scatter") and not self.bins:
            raise ValueError(f"{self.kind} needs explicit bin edges")


@dataclass
class RenderInfo:
    out: str
    n_points: int
    annotations: dict


def render(spec: PlotSpec) -> RenderInfo:
    """Write the figure and return what was drawn and annotated."""
    renderer = {
        "scatter": _render_scatter,
        "scatter-trend": _render_scatter_trend,
        "histogram": _render_histogram,
        "bin-scatter": _render_bin_scatter,
        "compare": _render_compare,
    }[spec.kind]
    fig, info = renderer(spec)
    fig.savefig(spec.out, dpi=120)
    plt.close(fig)
    return RenderInfo(out=spec.out, n_points=info.pop("n_points"), annotations=info)


def _load_xy(spec: PlotSpec, path):
    rows = read_table(path)
    return column(rows, spec.x, path), column(rows, spec.y, path), rows


def _render_scatter(spec: PlotSpec):
    xs, ys, _ = _load_xy(spec, spec.inputs[0])
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.scatter(xs, ys, s=12, alpha=0.7)
    _style(ax, spec)
    return fig, {"n_points": len(xs)}


def _render_scatter_trend(spec: PlotSpec):
    xs, ys, _ = _load_xy(spec, spec.inputs[0])
    slope, intercept = least_squares(xs, ys)
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.scatter(xs, ys, s=12, alpha=0.7)
    lo, hi = min(xs), max(xs)
    ax.plot([lo, hi], [intercept + slope * lo, intercept + slope * hi], color="crimson")
    ax.annotate(
        f"slope = {slope:.4f}\nintercept = {intercept:.4f}",
        xy=(0.03, 0.95),
        xycoords="axes fraction",
        va="top",
        fontsize=9,
        bbox={"boxstyle": "round", "fc": "white", "alpha": 0.8},
    )
    _style(ax, spec)
    return fig, {"n_points": len(xs), "slope": slope, "intercept": intercept}


def _render_histogram(spec: PlotSpec):
    rows = read_table(spec.inputs[0])
    values = column(rows, spec.x, spec.inputs[0])
    indices = bin_indices(values, spec.bins)
    counts = [indices.count(k) for k in range(len(spec.bins))]
    labels = _bin_labels(spec.bins)
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.bar(range(len(counts)), counts, tick_label=labels)
    ax.set_xlabel(spec.x)
    ax.set_ylabel("cities")
    ax.tick_params(axis="x", labelrotation=30)
    if spec.title:
        ax.set_title(spec.title)
    for k, count in enumerate(counts):
        ax.annotate(str(count), xy=(k, count), ha="center", va="bottom", fontsize=8)
    fig.tight_layout()
    return fig, {"n_points": len(values), "counts": counts}


def _render_bin_scatter(spec: PlotSpec):
    rows = read_table(spec.inputs[0])
    xs = column(rows, spec.x, spec.inputs[0])
    ys = column(rows, spec.y, spec.inputs[0])
    marker = column(rows, spec.bin_field, spec.inputs[0])
    indices = bin_indices(marker, spec.bins)
    labels = _bin_labels(spec.bins, prefix=f"{spec.bin_field} in ")
    cmap = plt.get_cmap("viridis", len(spec.bins))
    fig, ax = plt.subplots(figsize=(6.5, 5))
    counts = []
    for k in range(len(spec.bins)):
        bx = [x for x, i in zip(xs, indices) if i == k]
        by = [y for y, i in zip(ys, indices) if i == k]
        counts.append(len(bx))
        if bx:
            ax.scatter(bx, by, s=14, color=cmap(k), label=labels[k], alpha=0.8)
    ax.legend(fontsize=7, loc="best")
    _style(ax, spec)
    return fig, {"n_points": len(xs), "counts": counts}


def _render_compare(spec: PlotSpec):
    fig, axes = plt.subplots(1, 2, figsize=(11, 5), sharey=True)
    total = 0
    for ax, path in zip(axes, spec.inputs):
        xs, ys, _ = _load_xy(spec, path)
        total += len(xs)
        ax.scatter(xs, ys, s=12, alpha=0.7)
        ax.set_xlabel(spec.x)
        ax.set_title(str(path))
    axes[0].set_ylabel(spec.y)
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return fig, {"n_points": total}


def _style(ax, spec):
    ax.set_xlabel(spec.x)
    ax.set_ylabel(spec.y)
    if spec.title:
        ax.set_title(spec.title)
    ax.figure.tight_layout()


def _bin_labels(edges, prefix=""):
    labels = []
    lo = None
    for edge in edges:
        hi = "inf" if edge == float("inf") else f"{edge:g}"
        labels.append(f"{prefix}[{lo if lo is not None else '0'}, {hi})")
        lo = hi
    return labels
