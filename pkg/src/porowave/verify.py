"""Error norms against closed-form fields and convergence-rate fitting.

Errors are measured in the grid energy 1-norm and max-norm: each cell
contributes the energy norm of its state defect against the true solution
evaluated at the cell centroid, with the energy quadratic form of that
cell's own medium. The 1-norm averages those contributions, either
uniformly or weighted by cell area (the capacity function on mapped
grids); the max-norm takes the worst cell. Convergence rates are the
negated slopes of least-squares lines through log(error) as a function of
log(cells per side), and full refinement studies follow the fixed recipe:
initialize from the field at centroids, advance 1.25 periods with
analytic ghost filling, then measure.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from typing import Callable

import numpy as np

from .analytic import AnalyticField, evaluate
from .grid import MappedGrid
from .materials import global_coefficients
from .solver import SimulationState, StepConfig, advance, initialize_state

__all__ = [
    "ConvergenceFit",
    "ConvergenceResult",
    "ConvergenceScenario",
    "ErrorReport",
    "VerifyError",
    "fit_rate",
    "grid_error",
    "run_convergence_suite",
    "write_convergence_csv",
]


class VerifyError(ValueError):
    """Error measurement or rate fitting asked of unusable inputs."""


@dataclasses.dataclass(frozen=True)
class ErrorReport:
    """Energy-norm defect of one state against the true field."""

    norm1: float
    norm_max: float
    dims: tuple[int, int]
    time: float
    scenario: str = ""
    weighting: str = "uniform"


@dataclasses.dataclass(frozen=True)
class ConvergenceFit:
    """Least-squares rate through (N, error) pairs on log-log axes."""

    rate: float
    r_squared: float
    errors: tuple[tuple[int, float], ...]


@dataclasses.dataclass(frozen=True)
class ConvergenceScenario:
    """Everything a refinement study needs, free of file formats.

    ``field`` is either an AnalyticField or a callable (x, z, t) -> state
    array; it provides initial data, ghost filling, and the reference
    solution. ``make_grid`` builds the grid for a given cells-per-side
    count. ``step`` supplies solver options; its boundary and field
    entries are overridden by the protocol.
    """

    name: str
    field: AnalyticField | Callable
    omega: float
    make_grid: Callable[[int], MappedGrid]
    step: StepConfig = dataclasses.field(default_factory=StepConfig)
    periods: float = 1.25
    weighting: str = "uniform"
    dt: float | None = None


@dataclasses.dataclass(frozen=True)
class ConvergenceResult:
    reports: tuple[ErrorReport, ...]
    fit_norm1: ConvergenceFit
    fit_max: ConvergenceFit


def _as_callable(field) -> Callable:
    if isinstance(field, AnalyticField):
        return lambda x, z, t: evaluate(field, x, z, t)
    if callable(field):
        return field
    raise VerifyError(f"field {field!r} is neither an AnalyticField nor "
                      f"callable")


def grid_error(state: SimulationState, field, weighting: str = "uniform",
               scenario: str = "") -> ErrorReport:
    """Energy 1-norm and max-norm of state minus field at cell centroids."""
    if weighting not in ("uniform", "area"):
        raise VerifyError(f"weighting {weighting!r} not one of "
                          f"'uniform', 'area'")
    grid = state.grid
    fn = _as_callable(field)
    cent = grid.centroids
    truth = np.asarray(fn(cent[..., 0], cent[..., 1], state.time), float)
    if truth.shape != state.q.shape:
        raise VerifyError(
            f"field returned shape {truth.shape}, grid wants {state.q.shape}")
    diff = state.q - truth

    cell_norm = np.zeros(diff.shape[:2])
    midx = grid.material_index
    for j, mat in enumerate(grid.materials):
        mask = midx == j
        if not mask.any():
            continue
        E = global_coefficients(mat).E8()
        d = diff[mask]
        cell_norm[mask] = np.sqrt(np.einsum("ci,ij,cj->c", d, E, d))

    if weighting == "area":
        w = grid.capacities
        norm1 = float((w * cell_norm).sum() / w.sum())
    else:
        norm1 = float(cell_norm.sum() / cell_norm.size)
    return ErrorReport(norm1=norm1, norm_max=float(cell_norm.max()),
                       dims=(grid.N1, grid.N2), time=float(state.time),
                       scenario=scenario, weighting=weighting)


def fit_rate(errors) -> ConvergenceFit:
    """Negated log-log slope of error against cells per side."""
    pairs = [(int(n), float(e)) for n, e in errors]
    if len(pairs) < 3:
        raise VerifyError(f"need at least 3 grid sizes, got {len(pairs)}")
    if any(e <= 0.0 for _, e in pairs):
        raise VerifyError("errors must be positive to fit on log axes")
    ns = np.array([n for n, _ in pairs], float)
    if np.unique(ns).size < 2:
        raise VerifyError("grid sizes must not all coincide")
    lx = np.log(ns)
    ly = np.log(np.array([e for _, e in pairs]))
    lx_c = lx - lx.mean()
    slope = float((lx_c * (ly - ly.mean())).sum() / (lx_c**2).sum())
    fitted = ly.mean() + slope * lx_c
    ss_res = float(((ly - fitted) ** 2).sum())
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return ConvergenceFit(rate=-slope, r_squared=min(max(r2, 0.0), 1.0),
                          errors=tuple(pairs))


def run_convergence_suite(scenario: ConvergenceScenario,
                          grids) -> ConvergenceResult:
    """Refine, rerun, and fit: the fixed 1.25-period error protocol."""
    fn = _as_callable(scenario.field)
    t_end = scenario.periods * 2.0 * math.pi / scenario.omega
    cfg = dataclasses.replace(scenario.step, boundary="analytic_fill",
                              field=fn)
    reports = []
    for n in grids:
        grid = scenario.make_grid(int(n))
        state = initialize_state(grid, fn)
        state = advance(state, t_end, cfg, dt=scenario.dt)
        reports.append(grid_error(state, fn, weighting=scenario.weighting,
                                  scenario=scenario.name))
    fit1 = fit_rate([(r.dims[0], r.norm1) for r in reports])
    fitm = fit_rate([(r.dims[0], r.norm_max) for r in reports])
    return ConvergenceResult(reports=tuple(reports), fit_norm1=fit1,
                             fit_max=fitm)


def write_convergence_csv(path, result: ConvergenceResult) -> None:
    """One row per grid; rate and r2 columns carry the 1-norm fit."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "N1", "N2", "norm1", "normMax",
                         "rate", "r2"])
        for rep in result.reports:
            writer.writerow([rep.scenario, rep.dims[0], rep.dims[1],
                             repr(rep.norm1), repr(rep.norm_max),
                             repr(result.fit_norm1.rate),
                             repr(result.fit_norm1.r_squared)])
