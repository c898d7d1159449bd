"""Readers for the simulator's published output files.

This package never imports the simulator.  Everything it knows about
the data comes from the on-disk formats: PWV1 snapshots (4 magic bytes,
three little-endian uint32 dimensions, then a little-endian float64
payload with the second grid index outermost and the component index
innermost), ``key = value`` sidecar text, and plain CSV tables.
"""

from __future__ import annotations

import csv
import dataclasses
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "MAGIC",
    "FieldDump",
    "FormatError",
    "load_field",
    "read_sidecar",
    "read_snapshot",
    "read_table",
]

MAGIC = b"PWV1"
_HEADER = struct.Struct("<III")


class FormatError(Exception):
    """Raised when an input file does not follow its published format."""


def read_snapshot(path) -> np.ndarray:
    """Read one PWV1 snapshot as an (N1, N2, ncomp) float64 array."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if blob[:len(MAGIC)] != MAGIC:
        got = blob[:len(MAGIC)].hex() or "empty file"
        raise FormatError(
            f"{path}: bad magic at byte 0 (expected {MAGIC!r}, got {got})")
    header_end = len(MAGIC) + _HEADER.size
    if len(blob) < header_end:
        raise FormatError(
            f"{path}: header truncated at byte {len(blob)}"
            f" (need {header_end} bytes)")
    n1, n2, ncomp = _HEADER.unpack_from(blob, len(MAGIC))
    want = n1 * n2 * ncomp * 8
    have = len(blob) - header_end
    if have != want:
        raise FormatError(
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
        raise FormatError(f"cannot read sidecar {path}: {exc}") from exc
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(
                f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()
    return entries


@dataclasses.dataclass(frozen=True)
class FieldDump:
    """One snapshot plus whatever companion data its sidecar points at."""

    data: np.ndarray
    meta: dict
    material_map: np.ndarray | None = None
    centroids: np.ndarray | None = None


def load_field(path) -> FieldDump:
    """Read a snapshot along with its sidecar and auxiliary maps.

    Both the sidecar and the auxiliary files it names are optional; a
    bare ``.pwv1`` file still loads, it just carries no geometry.
    """
    path = Path(path)
    data = read_snapshot(path)
    meta_path = Path(str(path) + ".meta")
    meta = read_sidecar(meta_path) if meta_path.exists() else {}

    def companion(key: str) -> np.ndarray | None:
        name = meta.get(key, "")
        return read_snapshot(path.parent / name) if name else None

    return FieldDump(data=data, meta=meta,
                     material_map=companion("material_map"),
                     centroids=companion("centroids"))


def read_table(path) -> tuple[list[str], list[list[str]]]:
    """Read a CSV table, returning (header, rows)."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            records = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise FormatError(f"cannot read table {path}: {exc}") from exc
    if not records:
        raise FormatError(f"{path}: empty table")
    header, rows = records[0], records[1:]
    if not rows:
        raise FormatError(f"{path}: no data rows")
    width = len(header)
    for i, row in enumerate(rows, start=2):
        if len(row) != width:
            raise FormatError(
                f"{path}:{i}: row has {len(row)} fields, header has {width}")
    return header, rows
