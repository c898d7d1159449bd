"""Logically rectangular mapped grids with cell capacities and edge geometry.

A grid is built from a smooth mapping of a uniform computational rectangle
into the plane.  Cells are the images of computational rectangles; each cell
carries a capacity (physical area over computational area), each edge a unit
normal and a length ratio.  Three mapping families are provided:

* ``identity``: the computational rectangle itself, unit capacities.
* ``square_to_circle``: a central square block is deformed so that one grid
  ring becomes an exact circle of radius ``r1``; outside the circle the grid
  relaxes smoothly back to a rectilinear mesh.  Every grid ring, inside the
  block and out, is a quadruple of circular arcs meeting on the diagonals.
  Inside the block the arc radius follows ``circle_ring_radius``, so the
  innermost rings stay nearly straight (radius of curvature at least
  ``0.9 * r1``) and the d = 1 ring meets the circle with matching slope;
  outside, the arcs flatten gradually until the rings coincide with the
  untouched square rings of the rectilinear mesh.
* ``concentric_annulus``: as above, but between two designated rings the grid
  lines are exact concentric circles, so both material interfaces of an
  annular shell land precisely on grid lines.

Outside the mapped region every mapping is the exact identity, which keeps
domain boundaries straight and lets ghost cells be generated by evaluating
the mapping at computational coordinates beyond the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np

__all__ = [
    "GridBuildError",
    "GridMapping",
    "MappedGrid",
    "MaterialRegion",
    "annulus_femur_map",
    "build_grid",
    "circle_ring_radius",
    "femur_annulus_mapping",
    "identity_mapping",
    "square_to_circle_mapping",
    "square_to_circle_map",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT2 = 1.0 / math.sqrt(2.0)


class GridBuildError(ValueError):
    """Raised when a grid cannot be constructed as requested."""


def circle_ring_radius(d, r1):
    """Arc radius used for the grid ring at normalized coordinate ``d``.

    ``d`` is the infinity-norm ring coordinate of the central block, running
    from 0 at the center to 1 at the ring that becomes the circle of radius
    ``r1``.  The polynomial rises from ``0.9 * r1`` to ``r1`` with first
    derivative ``r1`` and vanishing second derivative at ``d = 1``, so the
    outermost rings of the block approach concentric circles while interior
    grid lines stay close to straight.
    """
    d = np.asarray(d, dtype=float)
    return r1 * (0.9 + d**19 - 0.9 * d**20)


def square_to_circle_map(xi1, xi2, r1):
    """Map the central block ``max(|xi|) <= r1`` onto the disk of radius r1.

    Each square ring of the block is carried onto four circular arcs; the
    ring at infinity-norm radius ``r1`` lands exactly on the circle of radius
    ``r1``, and its corners land on the diagonals.  Points are expected to
    satisfy ``max(|xi1|, |xi2|) <= r1``.
    """
    x1 = np.asarray(xi1, dtype=float)
    x2 = np.asarray(xi2, dtype=float)
    a = np.abs(x1)
    b = np.abs(x2)
    d = np.maximum(a, b) / r1
    offset = r1 * d / _SQRT2
    radius = circle_ring_radius(d, r1)
    center = offset - np.sqrt(radius * radius - offset * offset)
    # the coordinate along the flat direction is simply compressed by sqrt(2);
    # the transverse coordinate is read off the arc
    lo = np.minimum(a, b) / _SQRT2
    hi = center + np.sqrt(radius * radius - lo * lo)
    xp = np.where(a >= b, hi, lo)
    zp = np.where(a >= b, lo, hi)
    return np.copysign(xp, x1), np.copysign(zp, x2)


def _composite_map(x1, x2, r_core, r_outer, blend_radius):
    """Central block -> circles -> rounded squares -> exact identity.

    Every computational ring (infinity-norm radius t) maps to four circular
    arcs meeting on the diagonals, the same construction the central block
    uses.  The arc through apex ``(t, 0)`` and corner ``(P, P)`` has
    curvature ``2(t - P) / (t^2 - 2tP + 2P^2)``, which runs from ``1/t``
    when ``P = t/sqrt(2)`` (an exact circle) to zero when ``P = t`` (the
    untouched square ring).  The corner fraction ``P/t`` is held at
    ``1/sqrt(2)`` through the concentric shell ``r_core < t <= r_outer`` and
    raised to one by a quintic ramp over ``r_outer < t < blend_radius``, so
    the rings straighten gradually and the family stays free of positional
    interpolation between unrelated mappings.  Inside ``r_core`` the
    square-to-circle block applies; at and beyond ``blend_radius`` the map
    is the exact identity.
    """
    a = np.abs(x1)
    b = np.abs(x2)
    t = np.maximum(a, b)
    s = np.minimum(a, b)
    tsafe = np.where(t > 0.0, t, 1.0)

    # core block, evaluated on inputs clamped into it so inactive lanes stay
    # finite; the clamped values are discarded by the final selection
    scale = np.minimum(1.0, r_core / tsafe)
    cx, cz = square_to_circle_map(x1 * scale, x2 * scale, r_core)

    u = np.clip((t - r_outer) / (blend_radius - r_outer), 0.0, 1.0)
    w = u * u * u * (u * (6.0 * u - 15.0) + 10.0)
    rho = _INV_SQRT2 + (1.0 - _INV_SQRT2) * w
    zeta = s * rho
    kt = 2.0 * (1.0 - rho) / (tsafe * (1.0 - 2.0 * rho + 2.0 * rho * rho))
    kz = kt * zeta
    hi = t - kt * zeta * zeta / (1.0 + np.sqrt(np.maximum(0.0, 1.0 - kz * kz)))
    ring_x = np.copysign(np.where(a >= b, hi, zeta), x1)
    ring_z = np.copysign(np.where(a >= b, zeta, hi), x2)

    X = np.where(t <= r_core, cx, ring_x)
    Z = np.where(t <= r_core, cz, ring_z)
    X = np.where(t >= blend_radius, x1, X)
    Z = np.where(t >= blend_radius, x2, Z)
    return X, Z


def annulus_femur_map(xi1, xi2, r_core, r_outer, blend_radius=None):
    """Annulus mapping: exact circles of radius r_core and r_outer.

    The computational rings at infinity-norm radii ``r_core`` and ``r_outer``
    are carried onto the circles of those radii, with concentric circular
    grid lines in between.  Inside ``r_core`` the square-to-circle block is
    used; outside ``r_outer`` the grid relaxes to the identity, completing
    the transition at ``blend_radius`` (default ``2 * r_outer``).
    """
    if blend_radius is None:
        blend_radius = 2.0 * r_outer
    x1 = np.asarray(xi1, dtype=float)
    x2 = np.asarray(xi2, dtype=float)
    return _composite_map(x1, x2, r_core, r_outer, blend_radius)


@dataclass(frozen=True)
class GridMapping:
    """A named mapping from computational to physical coordinates.

    ``kind`` selects the family; the radii are meaningful for the circular
    kinds only.  Instances are callable on coordinate arrays and return the
    mapped ``(x, z)`` arrays.
    """

    kind: str
    x0: float
    x1: float
    z0: float
    z1: float
    r1: float = 0.0
    r_outer: float = 0.0
    blend_radius: float = 0.0

    def __call__(self, xi1, xi2):
        if self.kind == "identity":
            return (np.array(xi1, dtype=float, copy=True),
                    np.array(xi2, dtype=float, copy=True))
        a1 = np.asarray(xi1, dtype=float)
        a2 = np.asarray(xi2, dtype=float)
        return _composite_map(a1, a2, self.r1, self.r_outer, self.blend_radius)


def identity_mapping(x0: float, x1: float, z0: float, z1: float) -> GridMapping:
    if not (x1 > x0 and z1 > z0):
        raise ValueError("domain bounds must satisfy x1 > x0 and z1 > z0")
    return GridMapping("identity", x0, x1, z0, z1)


def square_to_circle_mapping(r1: float, half_width: float,
                             blend_radius: float | None = None) -> GridMapping:
    """Square domain [-half_width, half_width]^2 with a circle of radius r1.

    The grid ring at infinity-norm radius ``r1`` becomes the circle, so for a
    cell count divisible by ``half_width / r1`` the circle lies exactly on
    grid lines.  ``blend_radius`` bounds the deformed region (default
    ``min(3.2 * r1, half_width)``).
    """
    if r1 <= 0.0 or half_width <= r1:
        raise ValueError("need 0 < r1 < half_width")
    if blend_radius is None:
        blend_radius = min(3.2 * r1, half_width)
    if not (r1 < blend_radius <= half_width):
        raise ValueError("need r1 < blend_radius <= half_width")
    return GridMapping("square_to_circle", -half_width, half_width,
                       -half_width, half_width,
                       r1=r1, r_outer=r1, blend_radius=blend_radius)


def femur_annulus_mapping(r_core: float, r_outer: float, half_width: float,
                          blend_radius: float | None = None) -> GridMapping:
    """Square domain with two exact concentric circles (annular shell)."""
    if not (0.0 < r_core < r_outer < half_width):
        raise ValueError("need 0 < r_core < r_outer < half_width")
    if blend_radius is None:
        blend_radius = min(2.0 * r_outer, half_width)
    if not (r_outer < blend_radius <= half_width):
        raise ValueError("need r_outer < blend_radius <= half_width")
    return GridMapping("concentric_annulus", -half_width, half_width,
                       -half_width, half_width,
                       r1=r_core, r_outer=r_outer, blend_radius=blend_radius)


@dataclass(frozen=True)
class MaterialRegion:
    """A labeled material with a vectorized membership predicate.

    ``contains(x, z)`` receives physical coordinate arrays and returns a
    boolean array; cells are assigned to the first region (in list order)
    whose predicate holds at the cell centroid.
    """

    label: str
    material: object
    contains: Callable


@runtime_checkable
class _MappingLike(Protocol):
    kind: str
    x0: float
    x1: float
    z0: float
    z1: float

    def __call__(self, xi1, xi2): ...


class MappedGrid:
    """Geometry and material layout of one mapped grid.

    All arrays are stored on the grid extended by ``ghost`` rings of cells in
    each direction; the plain-named attributes are interior views.  Edge
    family 1 holds edges of constant first computational coordinate (normals
    point toward increasing xi1, from the lower-index cell into the
    higher-index cell); family 2 holds edges of constant second coordinate.
    Edge ratios are physical edge length over the computational spacing along
    the edge.
    """

    def __init__(self, mapping, N1, N2, dxi1, dxi2, ghost,
                 vertices_ext, capacities_ext, centroids_ext,
                 normals1_ext, ratios1_ext, normals2_ext, ratios2_ext,
                 material_index_ext, materials, labels):
        self.mapping = mapping
        self.N1 = N1
        self.N2 = N2
        self.dxi1 = dxi1
        self.dxi2 = dxi2
        self.ghost = ghost
        self.vertices_ext = vertices_ext
        self.capacities_ext = capacities_ext
        self.centroids_ext = centroids_ext
        self.normals1_ext = normals1_ext
        self.ratios1_ext = ratios1_ext
        self.normals2_ext = normals2_ext
        self.ratios2_ext = ratios2_ext
        self.material_index_ext = material_index_ext
        self.materials = tuple(materials)
        self.labels = tuple(labels)
        for arr in (vertices_ext, capacities_ext, centroids_ext, normals1_ext,
                    ratios1_ext, normals2_ext, ratios2_ext, material_index_ext):
            arr.setflags(write=False)

    def _core(self, arr):
        g = self.ghost
        return arr[g:-g, g:-g]

    @property
    def vertices(self):
        return self._core(self.vertices_ext)

    @property
    def capacities(self):
        return self._core(self.capacities_ext)

    @property
    def centroids(self):
        return self._core(self.centroids_ext)

    @property
    def material_index(self):
        return self._core(self.material_index_ext)

    @property
    def normals1(self):
        return self._core(self.normals1_ext)

    @property
    def ratios1(self):
        return self._core(self.ratios1_ext)

    @property
    def normals2(self):
        return self._core(self.normals2_ext)

    @property
    def ratios2(self):
        return self._core(self.ratios2_ext)

    def cell_material(self, i: int, j: int):
        return self.materials[self.material_index[i, j]]

    def total_area(self) -> float:
        return float(self.capacities.sum() * self.dxi1 * self.dxi2)


def _quantized_unit_normals(ex, ez):
    """Unit normals rotated from edge vectors, rounded then renormalized.

    Rounding to 12 decimals collapses normals that differ only by mapping
    roundoff (straight grid regions) onto bit-identical values, which keeps
    downstream caching of edge decompositions effective; renormalizing
    restores unit length to within one ulp.
    """
    lens = np.hypot(ex, ez)
    nx = np.round(ez / lens, 12)
    nz = np.round(-ex / lens, 12)
    scale = np.hypot(nx, nz)
    return np.stack([nx / scale, nz / scale], axis=-1)


def build_grid(mapping, N1: int, N2: int,
               material_regions: Sequence[MaterialRegion],
               ghost: int = 2) -> MappedGrid:
    """Construct a mapped grid with materials assigned by cell centroid.

    The mapping must expose domain bounds ``x0, x1, z0, z1``, a ``kind``
    string, and be callable on computational coordinate arrays.  Ghost rings
    are generated by evaluating the mapping at computational coordinates
    reflected past the boundary (a uniform continuation, since the
    computational grid is uniform); ghost cells take the material of the
    nearest interior cell.
    """
    if N1 < 4 or N2 < 4:
        raise GridBuildError(f"grid must be at least 4x4, got {N1}x{N2}")
    if not material_regions:
        raise GridBuildError("at least one material region is required")

    dxi1 = (mapping.x1 - mapping.x0) / N1
    dxi2 = (mapping.z1 - mapping.z0) / N2
    g = ghost

    idx1 = np.arange(-g, N1 + g + 1, dtype=float)
    idx2 = np.arange(-g, N2 + g + 1, dtype=float)
    xi1 = mapping.x0 + idx1 * dxi1
    xi2 = mapping.z0 + idx2 * dxi2
    XI1, XI2 = np.meshgrid(xi1, xi2, indexing="ij")
    VX, VZ = mapping(XI1, XI2)
    vertices_ext = np.stack([VX, VZ], axis=-1)

    if mapping.kind == "identity":
        # exact geometry of a uniform rectangular grid; the generic shoelace
        # route below would only add rounding noise to known-constant values
        ncell = (N1 + 2 * g, N2 + 2 * g)
        capacities_ext = np.ones(ncell)
        ratios1_ext = np.ones((N1 + 2 * g + 1, N2 + 2 * g))
        ratios2_ext = np.ones((N1 + 2 * g, N2 + 2 * g + 1))
        normals1_ext = np.zeros((N1 + 2 * g + 1, N2 + 2 * g, 2))
        normals1_ext[..., 0] = 1.0
        normals2_ext = np.zeros((N1 + 2 * g, N2 + 2 * g + 1, 2))
        normals2_ext[..., 1] = 1.0
    else:
        x00, z00 = VX[:-1, :-1], VZ[:-1, :-1]
        x10, z10 = VX[1:, :-1], VZ[1:, :-1]
        x11, z11 = VX[1:, 1:], VZ[1:, 1:]
        x01, z01 = VX[:-1, 1:], VZ[:-1, 1:]
        twice_area = ((x00 * z10 - x10 * z00) + (x10 * z11 - x11 * z10)
                      + (x11 * z01 - x01 * z11) + (x01 * z00 - x00 * z01))
        areas_ext = 0.5 * twice_area
        interior_areas = areas_ext[g:-g, g:-g]
        if interior_areas.min() <= 0.0:
            i, j = np.unravel_index(np.argmin(interior_areas),
                                    interior_areas.shape)
            raise GridBuildError(
                f"degenerate cell ({i}, {j}): signed area "
                f"{interior_areas[i, j]:.3e} is not positive")
        if areas_ext.min() <= 0.0:
            i, j = np.unravel_index(np.argmin(areas_ext), areas_ext.shape)
            raise GridBuildError(
                f"degenerate ghost cell ({i - g}, {j - g}): signed area "
                f"{areas_ext[i, j]:.3e} is not positive")
        capacities_ext = areas_ext / (dxi1 * dxi2)

        e1x = VX[:, 1:] - VX[:, :-1]
        e1z = VZ[:, 1:] - VZ[:, :-1]
        normals1_ext = _quantized_unit_normals(e1x, e1z)
        ratios1_ext = np.hypot(e1x, e1z) / dxi2

        e2x = VX[1:, :] - VX[:-1, :]
        e2z = VZ[1:, :] - VZ[:-1, :]
        # family-2 normals rotate the edge vector the other way (+90 degrees)
        lens = np.hypot(e2x, e2z)
        nx = np.round(-e2z / lens, 12)
        nz = np.round(e2x / lens, 12)
        scale = np.hypot(nx, nz)
        normals2_ext = np.stack([nx / scale, nz / scale], axis=-1)
        ratios2_ext = lens / dxi1

        _check_jacobian(mapping, N1, N2, dxi1, dxi2)

    centroids_ext = 0.25 * (vertices_ext[:-1, :-1] + vertices_ext[1:, :-1]
                            + vertices_ext[:-1, 1:] + vertices_ext[1:, 1:])

    cx = centroids_ext[g:-g, g:-g, 0]
    cz = centroids_ext[g:-g, g:-g, 1]
    index = np.full((N1, N2), -1, dtype=np.int16)
    for k, region in enumerate(material_regions):
        inside = np.asarray(region.contains(cx, cz), dtype=bool)
        index = np.where((index < 0) & inside, np.int16(k), index)
    if index.min() < 0:
        i, j = np.unravel_index(np.argmin(index), index.shape)
        raise GridBuildError(
            f"cell ({i}, {j}) at ({cx[i, j]:.6g}, {cz[i, j]:.6g}) is not "
            f"covered by any material region")
    material_index_ext = np.pad(index, g, mode="edge")

    return MappedGrid(mapping, N1, N2, dxi1, dxi2, g,
                      vertices_ext, capacities_ext, centroids_ext,
                      normals1_ext, ratios1_ext, normals2_ext, ratios2_ext,
                      material_index_ext,
                      [r.material for r in material_regions],
                      [r.label for r in material_regions])


def _check_jacobian(mapping, N1, N2, dxi1, dxi2):
    """Centered-difference Jacobian determinant check at all cell centers."""
    c1 = mapping.x0 + (np.arange(N1) + 0.5) * dxi1
    c2 = mapping.z0 + (np.arange(N2) + 0.5) * dxi2
    C1, C2 = np.meshgrid(c1, c2, indexing="ij")
    h1 = 1e-6 * dxi1
    h2 = 1e-6 * dxi2
    xp1, zp1 = mapping(C1 + h1, C2)
    xm1, zm1 = mapping(C1 - h1, C2)
    xp2, zp2 = mapping(C1, C2 + h2)
    xm2, zm2 = mapping(C1, C2 - h2)
    det = ((xp1 - xm1) * (zp2 - zm2) - (xp2 - xm2) * (zp1 - zm1)) / (4 * h1 * h2)
    if det.min() <= 0.0:
        i, j = np.unravel_index(np.argmin(det), det.shape)
        raise GridBuildError(
            f"mapping folds at cell ({i}, {j}): Jacobian determinant "
            f"{det[i, j]:.3e}")
