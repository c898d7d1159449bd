"""Batch figure renderer for porowave snapshots and CSV tables."""

from .figures import (
    KINDS,
    PlotDataError,
    PlotJob,
    plot_convergence,
    plot_field_contour,
    plot_zeta_sweep,
    power_of_two_levels,
    render,
)
from .formats import (
    MAGIC,
    FieldDump,
    FormatError,
    load_field,
    read_sidecar,
    read_snapshot,
    read_table,
)

__version__ = "0.1.0"

__all__ = [
    "KINDS",
    "MAGIC",
    "FieldDump",
    "FormatError",
    "PlotDataError",
    "PlotJob",
    "__version__",
    "load_field",
    "plot_convergence",
    "plot_field_contour",
    "plot_zeta_sweep",
    "power_of_two_levels",
    "read_sidecar",
    "read_snapshot",
    "read_table",
    "render",
]
