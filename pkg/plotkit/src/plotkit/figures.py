"""Offline figures from benchmark CSVs.

Four figure kinds, one per panel layout the experiments call for:
`threshold` (failure rate vs p, one curve per n), `memory-vs-n` and
`memory-vs-beta` (mean failure time against either grid axis, error
bars from the SEM column, grid-argmax stars on the vs-n plot), and
`fits` (scaling-law panels from a fit-report JSON with the fitted
curves overlaid on the per-beta values).

`render` writes the image and returns the plotted series, keyed by
curve label, so callers can check exactly what went into the figure.
Rendering is a pure function of the input files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

FIGURE_KINDS = ("threshold", "memory-vs-n", "memory-vs-beta", "fits")

_SCHEMAS = {
    "threshold": ("n", "p", "rate", "stderr"),
    "memory-vs-n": ("n", "beta", "mean_tfail", "sem"),
    "memory-vs-beta": ("n", "beta", "mean_tfail", "sem"),
}
_REPORT_KEYS = ("per_beta", "nstar_coef", "tstar_coef", "slope_coef")

Series = dict[str, list[tuple]]


class SchemaError(ValueError):
    """Input file does not look like the expected benchmark output."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple[Path, ...]
    out: Path
    log_x: bool = False
    log_y: bool = False

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise ValueError("no input files")


def _read_rows(path: Path, required: tuple[str, ...]) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        try:
            rows = [{k: float(row[k]) for k in required} for row in reader]
        except (TypeError, ValueError) as err:
            raise SchemaError(f"{path}: non-numeric cell ({err})") from err
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def _read_report(path: Path) -> dict:
    try:
        report = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise SchemaError(f"{path}: not JSON ({err})") from err
    missing = [k for k in _REPORT_KEYS if k not in report]
    if missing:
        raise SchemaError(f"{path}: missing report keys {missing}")
    if not report["per_beta"]:
        raise SchemaError(f"{path}: empty per_beta table")
    return report


def _grouped(rows: list[dict], by: str, x: str, y: str, err: str) -> Series:
    series: Series = {}
    for key in sorted({row[by] for row in rows}):
        mine = sorted((r[x], r[y], r[err]) for r in rows if r[by] == key)
        series[f"{by}={key:g}"] = mine
    return series


def _star(points: list[tuple]) -> tuple:
    best = points[0]
    for p in points[1:]:
        if p[1] > best[1]:  # ties keep the smaller x
            best = p
    return best


def _axes(ax, spec: FigureSpec):
    if spec.log_x:
        ax.set_xscale("log")
    if spec.log_y:
        ax.set_yscale("log")


def _render_curves(spec: FigureSpec, series: Series, xlabel: str, ylabel: str,
                   stars: Series | None = None) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for label, pts in series.items():
        xs, ys, errs = zip(*pts)
        ax.errorbar(xs, ys, yerr=errs, marker="o", markersize=3,
                    capsize=2, linewidth=1, label=label)
    for label, pts in (stars or {}).items():
        for x, y in pts:
            ax.plot([x], [y], marker="*", markersize=13, color="black", zorder=5)
    _axes(ax, spec)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.out, dpi=150)
    plt.close(fig)


def _render_fits(spec: FigureSpec, series: Series) -> None:
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.2))
    panels = (
        ("nstar", "n*", axes[0]),
        ("tstar", "t*", axes[1]),
        ("slope", "slope", axes[2]),
    )
    for name, ylabel, ax in panels:
        bx, by = zip(*series[f"{name}/points"])
        fx, fy = zip(*series[f"{name}/fit"])
        ax.plot(bx, by, "o", markersize=4, label="measured")
        ax.plot(fx, fy, "-", linewidth=1, label="fit")
        _axes(ax, spec)
        ax.set_xlabel("beta")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.out, dpi=150)
    plt.close(fig)


def render(spec: FigureSpec) -> Series:
    """Write the figure for `spec` and return its data series."""
    if spec.kind == "threshold":
        rows = _read_rows(spec.inputs[0], _SCHEMAS["threshold"])
        series = _grouped(rows, "n", "p", "rate", "stderr")
        _render_curves(spec, series, "p", "failure rate")
        return series

    if spec.kind == "memory-vs-n":
        rows = _read_rows(spec.inputs[0], _SCHEMAS["memory-vs-n"])
        series = _grouped(rows, "beta", "n", "mean_tfail", "sem")
        stars = {
            label: [_star([(x, y) for x, y, _ in pts])]
            for label, pts in series.items()
        }
        _render_curves(spec, series, "n", "mean t_fail", stars)
        return series | {f"{label}/nstar": pts for label, pts in stars.items()}

    if spec.kind == "memory-vs-beta":
        rows = _read_rows(spec.inputs[0], _SCHEMAS["memory-vs-beta"])
        series = _grouped(rows, "n", "beta", "mean_tfail", "sem")
        _render_curves(spec, series, "beta", "mean t_fail")
        return series

    report = _read_report(spec.inputs[0])
    betas = [entry["beta"] for entry in report["per_beta"]]
    a_n, b_n = report["nstar_coef"]
    a_t, b_t, c_t = report["tstar_coef"]
    a_s, b_s = report["slope_coef"]
    series = {
        "nstar/points": [(b, e["n_star"]) for b, e in zip(betas, report["per_beta"])],
        "nstar/fit": [(b, math.exp(a_n * b + b_n)) for b in betas],
        "tstar/points": [(b, e["t_star"]) for b, e in zip(betas, report["per_beta"])],
        "tstar/fit": [(b, math.exp(a_t * b * b + b_t * b + c_t)) for b in betas],
        "slope/points": [(b, e["slope"]) for b, e in zip(betas, report["per_beta"])],
        "slope/fit": [(b, a_s * b + b_s) for b in betas],
    }
    _render_fits(spec, series)
    return series
