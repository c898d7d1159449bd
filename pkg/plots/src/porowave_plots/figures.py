"""Figure builders for snapshot and table data.

Images are artifacts for humans.  Each builder returns the numbers the
figure was drawn from (contour levels, plotted series) so tests can
check the arithmetic without ever looking at pixels.
"""

from __future__ import annotations

import dataclasses
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .formats import FormatError, load_field, read_table

__all__ = [
    "KINDS",
    "PlotDataError",
    "PlotJob",
    "plot_convergence",
    "plot_field_contour",
    "plot_zeta_sweep",
    "power_of_two_levels",
    "render",
]

KINDS = ("field_contour", "convergence", "zeta_sweep")

# widest dynamic range a contour plot will try to cover
_MAX_OCTAVES = 20


class PlotDataError(ValueError):
    """Raised when parsed input cannot support the requested figure."""


@dataclasses.dataclass(frozen=True)
class PlotJob:
    """One figure request: what to read, how to draw it, where to put it."""

    kind: str
    in_path: str | Path
    out_path: str | Path
    normalization: float | None = None


def _floor_log2(x: float) -> int:
    mantissa, exponent = math.frexp(x)
    # frexp puts x = mantissa * 2**exponent with mantissa in [0.5, 1),
    # so the largest power of two not above x is 2**(exponent - 1)
    return exponent - 1


def power_of_two_levels(values, normalization: float | None = None):
    """Contour levels at every power of two across the data's range.

    Returns ``(scale, levels, dashed)``.  Levels are exact powers of two
    in units of the scaled data; ``dashed`` marks the negative powers,
    drawn dashed by convention.  Without an explicit normalization the
    data maximum becomes the scale, so the top contour sits at one.
    """
    v = np.asarray(values, dtype=float)
    finite = v[np.isfinite(v)]
    if finite.size == 0:
        raise PlotDataError("no finite values to contour")
    if normalization is None:
        scale = float(finite.max())
        if scale <= 0.0:
            raise PlotDataError(
                f"cannot normalize by the data maximum {scale!r}")
    else:
        scale = float(normalization)
        if scale <= 0.0:
            raise PlotDataError(
                f"normalization must be positive, got {scale!r}")
    scaled = finite / scale
    positive = scaled[scaled > 0.0]
    if positive.size == 0:
        raise PlotDataError("no positive values to contour")
    k_hi = _floor_log2(float(positive.max()))
    k_lo = max(_floor_log2(float(positive.min())), k_hi - _MAX_OCTAVES)
    levels = [2.0 ** k for k in range(k_lo, k_hi + 1)]
    dashed = [level < 1.0 for level in levels]
    return scale, levels, dashed


def plot_field_contour(job: PlotJob) -> list[float]:
    """Contour a 1-component snapshot; returns the levels drawn."""
    dump = load_field(job.in_path)
    ncomp = dump.data.shape[2]
    if ncomp != 1:
        raise PlotDataError(
            f"{job.in_path}: contour plots want a 1-component snapshot,"
            f" got {ncomp} components")
    values = dump.data[..., 0]
    scale, levels, dashed = power_of_two_levels(values, job.normalization)

    if dump.centroids is not None:
        X, Z = dump.centroids[..., 0], dump.centroids[..., 1]
    else:
        n1, n2 = values.shape
        X, Z = np.meshgrid(np.arange(n1, dtype=float),
                           np.arange(n2, dtype=float), indexing="ij")

    fig, ax = plt.subplots(figsize=(6.0, 5.4))
    styles = ["dashed" if d else "solid" for d in dashed]
    ax.contour(X, Z, values / scale, levels=levels, linestyles=styles,
               linewidths=0.7, colors="tab:blue")
    if dump.material_map is not None:
        mat = dump.material_map[..., 0]
        edges = [j + 0.5 for j in range(int(mat.max()))]
        if edges:
            ax.contour(X, Z, mat, levels=edges, colors="black",
                       linewidths=2.0)
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("z (m)")
    ax.set_title(Path(job.in_path).stem.replace("_", " "))
    fig.savefig(job.out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return levels


def _numeric(path, row_index: int, name: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise PlotDataError(
            f"{path}:{row_index}: column {name} holds {text!r},"
            f" expected a number") from None


def plot_convergence(job: PlotJob) -> dict[str, list[tuple[int, float, float]]]:
    """Log-log error against grid size with order-1 and -2 references.

    Returns the plotted series: scenario name to a sorted list of
    (cells per side, 1-norm error, max-norm error).
    """
    header, rows = read_table(job.in_path)
    needed = {"scenario", "N1", "norm1", "normMax"}
    missing = needed - set(header)
    if missing:
        raise PlotDataError(
            f"{job.in_path}: missing columns {sorted(missing)}")
    col = {name: header.index(name) for name in header}

    series: dict[str, list[tuple[int, float, float]]] = {}
    for i, row in enumerate(rows, start=2):
        n = int(_numeric(job.in_path, i, "N1", row[col["N1"]]))
        e1 = _numeric(job.in_path, i, "norm1", row[col["norm1"]])
        em = _numeric(job.in_path, i, "normMax", row[col["normMax"]])
        series.setdefault(row[col["scenario"]], []).append((n, e1, em))
    for points in series.values():
        points.sort()
    if all(len({n for n, _, _ in pts}) < 2 for pts in series.values()):
        raise PlotDataError(
            f"{job.in_path}: need at least 2 grid sizes to draw a"
            f" convergence plot")

    fig, ax = plt.subplots(figsize=(5.4, 4.6))
    for name, points in sorted(series.items()):
        ns = [p[0] for p in points]
        ax.loglog(ns, [p[1] for p in points], "o-", label=f"{name}, 1-norm")
        ax.loglog(ns, [p[2] for p in points], "s--",
                  label=f"{name}, max-norm")

    all_points = [p for pts in series.values() for p in pts]
    n_ref = np.array(sorted({p[0] for p in all_points}), dtype=float)
    n0, e0, _ = max(all_points)
    ax.loglog(n_ref, e0 * (n0 / n_ref), color="black", linewidth=2.2,
              label="order 1")
    ax.loglog(n_ref, e0 * (n0 / n_ref) ** 2, color="black", linewidth=1.1,
              label="order 2")
    ax.set_xlabel("cells per side")
    ax.set_ylabel("error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.savefig(job.out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return series


def plot_zeta_sweep(job: PlotJob) -> dict[tuple[str, str], list]:
    """Condition-number curves over the interface splitting parameter."""
    header, rows = read_table(job.in_path)
    needed = {"pair", "eta_d", "zeta", "cond"}
    missing = needed - set(header)
    if missing:
        raise PlotDataError(
            f"{job.in_path}: missing columns {sorted(missing)}")
    col = {name: header.index(name) for name in header}

    curves: dict[tuple[str, str], list[tuple[float, float]]] = {}
    for i, row in enumerate(rows, start=2):
        z = _numeric(job.in_path, i, "zeta", row[col["zeta"]])
        c = _numeric(job.in_path, i, "cond", row[col["cond"]])
        curves.setdefault((row[col["pair"]], row[col["eta_d"]]), []) \
            .append((z, c))

    fig, ax = plt.subplots(figsize=(5.4, 4.2))
    for (pair, eta_d), points in sorted(curves.items()):
        points.sort()
        ax.semilogy([p[0] for p in points], [p[1] for p in points],
                    label=f"{pair}, eta_d = {eta_d}")
    ax.set_xlabel("zeta")
    ax.set_ylabel("condition number")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.savefig(job.out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return curves


def render(job: PlotJob):
    """Dispatch one job to its builder; returns what the builder returns."""
    if job.kind == "field_contour":
        return plot_field_contour(job)
    if job.kind == "convergence":
        return plot_convergence(job)
    if job.kind == "zeta_sweep":
        return plot_zeta_sweep(job)
    raise PlotDataError(
        f"unknown plot kind {job.kind!r}; choose from {', '.join(KINDS)}")
