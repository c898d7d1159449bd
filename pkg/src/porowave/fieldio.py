"""Binary field snapshots and their text sidecars.

A snapshot file is a flat array of little-endian IEEE-754 doubles behind a
small fixed header: the four magic bytes ``PWV1``, then the grid dimensions
N1 and N2 and the per-cell component count, each a little-endian unsigned
32-bit integer.  The payload runs with the second grid index outermost, the
first grid index next, and the component index fastest, so a reader can
reshape the raw doubles to (N2, N1, ncomp) without any reordering.

Every snapshot gets a companion text sidecar at ``<name>.meta`` with one
``key = value`` entry per line: what the array holds, the grid dimensions,
the simulation time, the grid mapping and its parameters, and the names of
two auxiliary snapshots shared by all dumps of one run (the per-cell
material index map and the physical centroid coordinates).  Auxiliary
snapshots are ordinary single- and two-component files in the same format,
so a consumer needs exactly one parser.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .materials import global_coefficients

__all__ = [
    "FieldIOError",
    "MAGIC",
    "dump_energy",
    "dump_field",
    "energy_density",
    "read_array",
    "read_sidecar",
    "write_array",
]

MAGIC = b"PWV1"
_HEADER = struct.Struct("<III")
_MAPPING_FIELDS = ("x0", "x1", "z0", "z1", "r1", "r_outer", "blend_radius")


class FieldIOError(Exception):
    """Raised for malformed, truncated, or unwritable snapshot files."""


def write_array(path, data, sidecar=None) -> None:
    """Write one snapshot; ``data`` must be shaped (N1, N2) or (N1, N2, ncomp).

    A two-axis array is stored as a single-component snapshot.  When a
    ``sidecar`` mapping is given its entries are written line by line to
    ``<path>.meta``.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 2:
        data = data[..., None]
    if data.ndim != 3:
        raise FieldIOError(
            f"snapshot array must have 2 or 3 axes, got {data.ndim}")
    n1, n2, ncomp = data.shape
    payload = np.ascontiguousarray(data.transpose(1, 0, 2)).astype("<f8")
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(_HEADER.pack(n1, n2, ncomp))
            fh.write(payload.tobytes())
    except OSError as exc:
        raise FieldIOError(f"cannot write snapshot {path}: {exc}") from exc
    if sidecar is not None:
        _write_sidecar(Path(str(path) + ".meta"), sidecar)


def read_array(path) -> np.ndarray:
    """Read a snapshot back as an (N1, N2, ncomp) float array."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise FieldIOError(f"cannot read snapshot {path}: {exc}") from exc
    if len(blob) < len(MAGIC) or blob[:len(MAGIC)] != MAGIC:
        got = blob[:len(MAGIC)].hex() or "empty file"
        raise FieldIOError(
            f"{path}: bad magic at byte 0 (expected {MAGIC!r}, got {got})")
    header_end = len(MAGIC) + _HEADER.size
    if len(blob) < header_end:
        raise FieldIOError(
            f"{path}: header truncated at byte {len(blob)}"
            f" (need {header_end} bytes)")
    n1, n2, ncomp = _HEADER.unpack_from(blob, len(MAGIC))
    want = n1 * n2 * ncomp * 8
    have = len(blob) - header_end
    if have != want:
        raise FieldIOError(
            f"{path}: payload holds {have} bytes at byte {header_end},"
            f" expected {want} for {n1}x{n2}x{ncomp} doubles")
    flat = np.frombuffer(blob, dtype="<f8", offset=header_end)
    return flat.reshape(n2, n1, ncomp).transpose(1, 0, 2).copy()


def read_sidecar(path) -> dict:
    """Parse a ``key = value`` sidecar into a dict of strings."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FieldIOError(f"cannot read sidecar {path}: {exc}") from exc
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FieldIOError(
                f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()
    return entries


def _write_sidecar(path: Path, entries) -> None:
    lines = "".join(f"{key} = {value}\n" for key, value in entries.items())
    try:
        path.write_text(lines, encoding="utf-8")
    except OSError as exc:
        raise FieldIOError(f"cannot write sidecar {path}: {exc}") from exc


def _mapping_entries(mapping) -> dict:
    entries = {"mapping": getattr(mapping, "kind", "custom")}
    for name in _MAPPING_FIELDS:
        if hasattr(mapping, name):
            entries[f"mapping.{name}"] = repr(float(getattr(mapping, name)))
    return entries


def _grid_entries(state, path: Path, aux_stem) -> dict:
    """Sidecar entries shared by every dump, writing aux maps as needed."""
    grid = state.grid
    aux = Path(aux_stem) if aux_stem is not None else path.with_suffix("")
    mat_path = Path(str(aux) + ".mat.pwv1")
    xy_path = Path(str(aux) + ".xy.pwv1")
    write_array(mat_path, grid.material_index.astype(np.float64))
    write_array(xy_path, grid.centroids)
    return {
        "n1": grid.N1,
        "n2": grid.N2,
        "time": repr(float(state.time)),
        **_mapping_entries(grid.mapping),
        "materials": ",".join(grid.labels),
        "material_map": os.path.relpath(mat_path, path.parent),
        "centroids": os.path.relpath(xy_path, path.parent),
    }


def dump_field(state, path, aux_stem=None) -> None:
    """Write the full 8-component state with sidecar and auxiliary maps.

    Snapshots of one run should pass a common ``aux_stem`` so they share a
    single material map and centroid file instead of rewriting copies.
    """
    path = Path(path)
    entries = {"kind": "state", "components": 8,
               **_grid_entries(state, path, aux_stem)}
    write_array(path, state.q, sidecar=entries)


def dump_energy(state, path, aux_stem=None) -> None:
    """Write per-cell energy density as a single-component snapshot."""
    path = Path(path)
    entries = {"kind": "energy_density", "components": 1,
               **_grid_entries(state, path, aux_stem)}
    write_array(path, energy_density(state), sidecar=entries)


def energy_density(state) -> np.ndarray:
    """Per-cell energy density, ``q . E q / 2`` with each cell's own E."""
    grid = state.grid
    q = state.q
    out = np.zeros(q.shape[:2])
    for index, mat in enumerate(grid.materials):
        mask = grid.material_index == index
        if not mask.any():
            continue
        E = global_coefficients(mat).E8()
        qm = q[mask]
        out[mask] = 0.5 * np.einsum("ci,ij,cj->c", qm, E, qm)
    return out
