"""Render campaign CSVs into figures.

Four figure kinds mirror the simulator's output tables:

  pdf        two-column (x, density) tables, one curve per input file
  cdf        per-user throughput tables; plots the empirical CDF per file
  sweep      threshold sweep table (eps, scheduler, cell_average, cell_edge)
  tightness  bound-gap table (d2, gap_nus, gap_localnus, gap_lus)

Rendering is read-only: input files are never written.  A CDF that comes out
non-monotone (NaNs or corrupted rows) raises instead of silently plotting.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

FIGURE_KINDS = ("pdf", "cdf", "sweep", "tightness")

THEME = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.6,
    "legend.fontsize": 9,
}


@dataclass
class FigureSpec:
    kind: str
    inputs: list
    output: str
    series_labels: list = field(default_factory=list)
    x_label: str = ""
    y_label: str = ""
    title: str = ""

    def label(self, index: int) -> str:
        if index < len(self.series_labels):
            return self.series_labels[index]
        return f"series {index}"


def load_spec(path) -> FigureSpec:
    with open(path) as fh:
        payload = json.load(fh)
    spec = FigureSpec(
        kind=payload["kind"],
        inputs=list(payload["inputs"]),
        output=payload["output"],
        series_labels=list(payload.get("series_labels", [])),
        x_label=payload.get("x_label", ""),
        y_label=payload.get("y_label", ""),
        title=payload.get("title", ""),
    )
    if spec.kind not in FIGURE_KINDS:
        raise ValueError(f"unknown figure kind {spec.kind!r}")
    if not spec.inputs:
        raise ValueError("spec lists no input CSVs")
    return spec


def _read_csv(path, required_columns) -> dict:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required_columns:
            if col not in header:
                raise ValueError(f"{path}: missing column {col!r}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    out = {}
    for col in required_columns:
        out[col] = [row[col] for row in rows]
    return out


def _floats(values) -> list:
    return [float(v) for v in values]


def _plot_pdf(ax, spec: FigureSpec) -> None:
    for i, path in enumerate(spec.inputs):
        table = _read_csv(path, ["x", "density"])
        ax.plot(_floats(table["x"]), _floats(table["density"]), label=spec.label(i))


def _plot_cdf(ax, spec: FigureSpec) -> None:
    for i, path in enumerate(spec.inputs):
        table = _read_csv(path, ["normalized_throughput"])
        values = sorted(_floats(table["normalized_throughput"]))
        n = len(values)
        levels = [(k + 1) / n for k in range(n)]
        for a, b in zip(values, values[1:]):
            if not b >= a:  # NaN or corrupted ordering
                raise ValueError(f"{path}: CDF support is not nondecreasing")
        ax.plot(values, levels, label=spec.label(i))
    ax.set_ylim(0.0, 1.0)


def _plot_sweep(ax, spec: FigureSpec) -> None:
    for i, path in enumerate(spec.inputs):
        table = _read_csv(path, ["eps", "scheduler", "cell_average", "cell_edge"])
        by_sched: dict = {}
        for eps, name, avg in zip(_floats(table["eps"]), table["scheduler"],
                                  _floats(table["cell_average"])):
            by_sched.setdefault(name, []).append((eps, avg))
        for name in sorted(by_sched):
            pts = sorted(by_sched[name])
            label = spec.label(i) if len(spec.inputs) > 1 else name
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                    label=f"{label} {name}" if len(spec.inputs) > 1 else label)


def _plot_tightness(ax, spec: FigureSpec) -> None:
    for i, path in enumerate(spec.inputs):
        table = _read_csv(path, ["d2", "gap_nus", "gap_localnus", "gap_lus"])
        d2 = _floats(table["d2"])
        for col, style in (("gap_nus", "-"), ("gap_localnus", "--"), ("gap_lus", ":")):
            suffix = col.removeprefix("gap_")
            label = suffix if len(spec.inputs) == 1 else f"{spec.label(i)} {suffix}"
            ax.plot(d2, _floats(table[col]), style, label=label)


_RENDERERS = {
    "pdf": _plot_pdf,
    "cdf": _plot_cdf,
    "sweep": _plot_sweep,
    "tightness": _plot_tightness,
}


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the output path."""
    with plt.rc_context(THEME):
        fig, ax = plt.subplots()
        try:
            _RENDERERS[spec.kind](ax, spec)
            if spec.x_label:
                ax.set_xlabel(spec.x_label)
            if spec.y_label:
                ax.set_ylabel(spec.y_label)
            if spec.title:
                ax.set_title(spec.title)
            ax.legend()
            fig.tight_layout()
            fig.savefig(spec.output)
        finally:
            plt.close(fig)
    return spec.output
