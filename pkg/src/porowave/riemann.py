"""Edge-local wave decompositions for poroelastic and fluid media.

Every grid edge separates two cells whose media may match or differ. This
module builds the directional eigensystem seen across an edge (six waves
in a porous medium, two in an inviscid fluid), solves the linear Riemann
problem there, and enforces the hydraulic contact condition (open, sealed
or imperfect) when the media differ. A single-entry most-recently-used
cache skips recomputation along runs of identical edges.

Sign conventions: the edge normal points from the left cell into the
right cell. Waves with negative speed travel into the left cell, waves
with positive speed into the right cell. Wave lists are always ordered by
ascending signed speed.
"""

from __future__ import annotations

import dataclasses
import functools
import math

import numpy as np

from .linalg import SingularMatrixError, cond_2norm, solve_lu, sym_eigen
from .materials import (
    CoefficientSet,
    FluidMaterial,
    MaterialError,
    PoroMaterial,
    global_coefficients,
    poro_coefficients,
    state_rotation,
)

__all__ = [
    "EdgeContext",
    "EigenCache",
    "InterfaceConfigError",
    "RiemannSolution",
    "UnphysicalMaterialError",
    "WaveSet",
    "cache_lookup",
    "edge_context",
    "edge_eigensystem",
    "interface_condition_number",
    "interface_matrices",
    "interface_system",
    "solve_edge",
    "solve_interface",
    "solve_same_material",
    "transverse_solve",
]

_INV_SQRT2 = 1.0 / math.sqrt(2.0)

Material = "PoroMaterial | FluidMaterial"


class UnphysicalMaterialError(MaterialError):
    """A directional eigenproblem produced a non-positive squared speed."""


class InterfaceConfigError(ValueError):
    """The coupling system at a material interface cannot be solved."""


# ---------------------------------------------------------------------------
# edge context
# ---------------------------------------------------------------------------

_KIND_TYPES = {
    "fluid_fluid": (FluidMaterial, FluidMaterial),
    "poro_poro": (PoroMaterial, PoroMaterial),
    "poro_fluid": (PoroMaterial, FluidMaterial),
    "fluid_poro": (FluidMaterial, PoroMaterial),
}


@functools.lru_cache(maxsize=None)
def _coeffs(mat: PoroMaterial | FluidMaterial) -> CoefficientSet:
    return global_coefficients(mat)


@functools.lru_cache(maxsize=None)
def _energy8(mat: PoroMaterial | FluidMaterial) -> np.ndarray:
    out = _coeffs(mat).E8()
    out.setflags(write=False)
    return out


def classify_interface(left, right) -> str:
    if left == right:
        return "same"
    lf, rf = isinstance(left, FluidMaterial), isinstance(right, FluidMaterial)
    if lf and rf:
        return "fluid_fluid"
    if lf:
        return "fluid_poro"
    if rf:
        return "poro_fluid"
    return "poro_poro"


@dataclasses.dataclass(frozen=True, eq=False)
class EdgeContext:
    """Everything a Riemann solve at one edge needs to know.

    The normal is a unit vector in global axes pointing from the left
    cell into the right cell. ``edge_ratio`` is the physical edge length
    divided by the computational cell width; it rescales transverse
    fluctuations on mapped grids and stays 1 on identity grids.
    """

    normal: tuple[float, float]
    material_left: PoroMaterial | FluidMaterial
    material_right: PoroMaterial | FluidMaterial
    coeffs_left: CoefficientSet
    coeffs_right: CoefficientSet
    interface_kind: str
    eta_d: float = 1.0
    zeta: float = 0.5
    edge_ratio: float = 1.0
    label_left: str = "left"
    label_right: str = "right"

    def __post_init__(self):
        nx, nz = self.normal
        if abs(math.hypot(nx, nz) - 1.0) > 1e-14:
            raise ValueError(f"edge normal ({nx!r}, {nz!r}) is not unit length")
        if not 0.0 <= self.eta_d <= 1.0:
            raise ValueError(f"discharge efficiency {self.eta_d!r} outside [0, 1]")
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError(f"pressure weighting {self.zeta!r} outside [0, 1]")
        if self.edge_ratio <= 0.0:
            raise ValueError(f"edge ratio {self.edge_ratio!r} must be positive")
        if self.interface_kind == "same":
            if self.material_left != self.material_right:
                raise ValueError("interface kind 'same' with differing media")
        else:
            types = _KIND_TYPES.get(self.interface_kind)
            if types is None:
                raise ValueError(f"unknown interface kind {self.interface_kind!r}")
            if not (isinstance(self.material_left, types[0])
                    and isinstance(self.material_right, types[1])):
                raise ValueError(
                    f"interface kind {self.interface_kind!r} does not match "
                    f"the media of '{self.label_left}' and '{self.label_right}'")

    @property
    def cache_key(self):
        return (self.material_left, self.material_right, self.normal,
                self.eta_d, self.zeta)


def edge_context(material_left, material_right, normal, *, eta_d: float = 1.0,
                 zeta: float = 0.5, edge_ratio: float = 1.0,
                 interface_kind: str | None = None, label_left: str = "left",
                 label_right: str = "right") -> EdgeContext:
    """Build an EdgeContext, classifying the interface kind if not forced."""
    if interface_kind is None:
        interface_kind = classify_interface(material_left, material_right)
    return EdgeContext(
        normal=(float(normal[0]), float(normal[1])),
        material_left=material_left,
        material_right=material_right,
        coeffs_left=_coeffs(material_left),
        coeffs_right=_coeffs(material_right),
        interface_kind=interface_kind,
        eta_d=eta_d,
        zeta=zeta,
        edge_ratio=edge_ratio,
        label_left=label_left,
        label_right=label_right,
    )


# ---------------------------------------------------------------------------
# directional eigensystems
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True, eq=False)
class WaveSet:
    """The propagating waves seen by one side of an edge.

    ``vectors`` holds one 8-component shape per column, orthonormal under
    the medium's energy form, carrying half its energy in the stress-like
    slots and half in the velocity-like slots. Speeds are signed, sorted
    ascending, and occur in exact +/- pairs.
    """

    count: int
    speeds: np.ndarray
    vectors: np.ndarray
    material: PoroMaterial | FluidMaterial
    label: str
    normal: tuple[float, float]
    energy: np.ndarray

    def __post_init__(self):
        self.speeds.setflags(write=False)
        self.vectors.setflags(write=False)


@dataclasses.dataclass(frozen=True, eq=False)
class _PoroEigenData:
    """Per-material blocks reused by every directional eigensolve."""

    cos_t: float
    sin_t: float
    A_sv: np.ndarray
    B_sv: np.ndarray
    L_diag: np.ndarray
    LinvT: np.ndarray
    M411: np.ndarray
    M413: np.ndarray
    M433: np.ndarray
    T8: np.ndarray


@functools.lru_cache(maxsize=None)
def _poro_eigen_data(mat: PoroMaterial) -> _PoroEigenData:
    from .materials import derive_scalars

    sc = derive_scalars(mat)
    cs = poro_coefficients(mat)

    # E_v = L L^T with L upper triangular; its sparsity gives a closed-form
    # inverse
    l0 = math.sqrt(sc.Delta1 / sc.m1)
    l1 = math.sqrt(sc.Delta3 / sc.m3)
    l2 = math.sqrt(sc.m1)
    l3 = math.sqrt(sc.m3)
    l02 = mat.rho_f / l2
    l13 = mat.rho_f / l3
    Linv = np.array([
        [1.0 / l0, 0.0, -l02 / (l0 * l2), 0.0],
        [0.0, 1.0 / l1, 0.0, -l13 / (l1 * l3)],
        [0.0, 0.0, 1.0 / l2, 0.0],
        [0.0, 0.0, 0.0, 1.0 / l3],
    ])

    def squeeze(sv_a, sv_b):
        return Linv @ (sv_a.T @ cs.E_s @ sv_b) @ Linv.T

    M411 = squeeze(cs.A_sv, cs.A_sv)
    M433 = squeeze(cs.B_sv, cs.B_sv)
    M413 = squeeze(cs.A_sv, cs.B_sv) + squeeze(cs.B_sv, cs.A_sv)

    return _PoroEigenData(
        cos_t=math.cos(mat.theta),
        sin_t=math.sin(mat.theta),
        A_sv=cs.A_sv,
        B_sv=cs.B_sv,
        L_diag=np.array([l0, l1, l2, l3]),
        LinvT=np.ascontiguousarray(Linv.T),
        M411=0.5 * (M411 + M411.T),
        M413=0.5 * (M413 + M413.T),
        M433=0.5 * (M433 + M433.T),
        T8=state_rotation(mat.theta),
    )


def _poro_waveset(mat: PoroMaterial, normal, label: str) -> WaveSet:
    data = _poro_eigen_data(mat)
    nx, nz = normal
    n1 = data.cos_t * nx + data.sin_t * nz
    n3 = -data.sin_t * nx + data.cos_t * nz

    M4 = (n1 * n1) * data.M411 + (n1 * n3) * data.M413 + (n3 * n3) * data.M433

    # deflate the tangential-slip direction, which carries no wave
    y0 = np.array([0.0, 0.0, -n3 * data.L_diag[2], n1 * data.L_diag[3]])
    y0 /= math.hypot(y0[2], y0[3])
    seed = 2 if abs(y0[3]) >= abs(y0[2]) else 3
    w = -y0[seed] * y0
    w[seed] += 1.0
    w /= math.sqrt(float(w @ w))
    Y3 = np.zeros((4, 3))
    Y3[0, 0] = 1.0
    Y3[1, 1] = 1.0
    Y3[:, 2] = w

    M3 = Y3.T @ M4 @ Y3
    lam2, U = sym_eigen(0.5 * (M3 + M3.T))
    if lam2[0] <= 0.0:
        raise UnphysicalMaterialError(
            f"squared wave speed {lam2[0]!r} along normal ({nx:.6g}, {nz:.6g}) "
            f"is not positive; the medium '{label}' admits no wave there")
    c = np.sqrt(lam2)

    Asv_n = n1 * data.A_sv + n3 * data.B_sv
    vectors = np.empty((8, 6))
    for k in range(3):
        u = U[:, k] * _INV_SQRT2
        rv = data.LinvT @ (Y3 @ u)
        rs = (Asv_n @ rv) / c[k]
        vectors[:4, 3 + k] = rs
        vectors[4:, 3 + k] = rv
        vectors[:4, 2 - k] = -rs
        vectors[4:, 2 - k] = rv
    vectors = data.T8 @ vectors

    speeds = np.array([-c[2], -c[1], -c[0], c[0], c[1], c[2]])
    return WaveSet(count=6, speeds=speeds, vectors=vectors, material=mat,
                   label=label, normal=tuple(normal), energy=_energy8(mat))


def _fluid_waveset(mat: FluidMaterial, normal, label: str) -> WaveSet:
    nx, nz = normal
    c = mat.sound_speed
    Z = mat.impedance
    scale = 1.0 / math.sqrt(2.0 * mat.rho_f)
    vectors = np.zeros((8, 2))
    vectors[0, 0], vectors[0, 1] = -Z * scale, Z * scale
    vectors[6, :] = nx * scale
    vectors[7, :] = nz * scale
    return WaveSet(count=2, speeds=np.array([-c, c]), vectors=vectors,
                   material=mat, label=label, normal=tuple(normal),
                   energy=_energy8(mat))


def edge_eigensystem(ctx: EdgeContext, side: str) -> WaveSet:
    """All propagating waves of one side's medium along the edge normal."""
    if side == "left":
        mat, label = ctx.material_left, ctx.label_left
    elif side == "right":
        mat, label = ctx.material_right, ctx.label_right
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if isinstance(mat, FluidMaterial):
        return _fluid_waveset(mat, ctx.normal, label)
    return _poro_waveset(mat, ctx.normal, label)


# ---------------------------------------------------------------------------
# eigensystem cache
# ---------------------------------------------------------------------------


class EigenCache:
    """Single-entry most-recent cache of the (left, right) WaveSet pair.

    Edges are swept dimension by dimension, so long runs share one context
    and a one-deep cache already removes nearly every recomputation. Keys
    compare bit-exactly; a normal differing in the last bit is a miss.
    """

    __slots__ = ("_key", "_pair", "hits", "misses")

    def __init__(self):
        self._key = None
        self._pair = None
        self.hits = 0
        self.misses = 0

    def lookup(self, ctx: EdgeContext):
        key = ctx.cache_key
        if self._key is not None and key == self._key:
            self.hits += 1
            return self._pair
        self.misses += 1
        return None

    def store(self, ctx: EdgeContext, pair) -> None:
        self._key = ctx.cache_key
        self._pair = pair

    def fetch(self, ctx: EdgeContext):
        pair = self.lookup(ctx)
        if pair is None:
            ws_l = edge_eigensystem(ctx, "left")
            if ctx.material_left == ctx.material_right:
                ws_r = ws_l
            else:
                ws_r = edge_eigensystem(ctx, "right")
            pair = (ws_l, ws_r)
            self.store(ctx, pair)
        return pair

    @property
    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0


_DEFAULT_CACHE = EigenCache()


def cache_lookup(ctx: EdgeContext, cache: EigenCache | None = None):
    """Return the cached (left, right) WaveSet pair for ctx, or None."""
    return (_DEFAULT_CACHE if cache is None else cache).lookup(ctx)


# ---------------------------------------------------------------------------
# interface condition matrices
# ---------------------------------------------------------------------------


def _pore_impedance(mat: PoroMaterial) -> float:
    return math.sqrt(mat.K_f * mat.rho_f)


def _poro_fluid_rows(nx, nz, eta, Z):
    # left: porous medium, right: free fluid; rows are
    #   total normal flux, traction x, traction z, pressure/discharge law
    C_l = np.zeros((4, 8))
    C_l[0, 4], C_l[0, 5], C_l[0, 6], C_l[0, 7] = nx, nz, nx, nz
    C_l[1, 1], C_l[1, 3] = nx, nz
    C_l[2, 2], C_l[2, 3] = nz, nx
    C_l[3, 0] = eta
    C_l[3, 6], C_l[3, 7] = -Z * (1.0 - eta) * nx, -Z * (1.0 - eta) * nz

    C_r = np.zeros((4, 8))
    C_r[0, 6], C_r[0, 7] = nx, nz
    C_r[1, 0] = -nx
    C_r[2, 0] = -nz
    C_r[3, 0] = eta
    return C_l, C_r


def _poro_poro_rows(nx, nz, eta, zeta, Z):
    # rows: traction x, traction z, v_x, v_z, normal relative flow,
    # pressure/discharge law weighted between the two trace pressures
    C_l = np.zeros((6, 8))
    C_l[0, 1], C_l[0, 3] = nx, nz
    C_l[1, 2], C_l[1, 3] = nz, nx
    C_l[2, 4] = 1.0
    C_l[3, 5] = 1.0
    C_l[4, 6], C_l[4, 7] = nx, nz
    C_r = C_l.copy()
    C_l[5, 0] = eta
    C_l[5, 6] = -(1.0 - zeta) * Z * (1.0 - eta) * nx
    C_l[5, 7] = -(1.0 - zeta) * Z * (1.0 - eta) * nz
    C_r[5, 0] = eta
    C_r[5, 6] = zeta * Z * (1.0 - eta) * nx
    C_r[5, 7] = zeta * Z * (1.0 - eta) * nz
    return C_l, C_r


def interface_matrices(ctx: EdgeContext) -> tuple[np.ndarray, np.ndarray]:
    """Trace-condition matrices (C_l, C_r) with C_l Q^- = C_r Q^+."""
    nx, nz = ctx.normal
    kind = ctx.interface_kind
    if kind == "poro_fluid":
        return _poro_fluid_rows(nx, nz, ctx.eta_d,
                                _pore_impedance(ctx.material_left))
    if kind == "fluid_poro":
        # mirror of the porous-fluid case: swap sides and flip the normal
        C_l, C_r = _poro_fluid_rows(-nx, -nz, ctx.eta_d,
                                    _pore_impedance(ctx.material_right))
        return C_r, C_l
    if kind == "poro_poro":
        return _poro_poro_rows(nx, nz, ctx.eta_d, ctx.zeta,
                               _pore_impedance(ctx.material_left))
    if kind == "fluid_fluid":
        C = np.zeros((2, 8))
        C[0, 0] = 1.0
        C[1, 6], C[1, 7] = nx, nz
        return C, C.copy()
    raise ValueError(f"no interface matrices for kind {kind!r}")


# ---------------------------------------------------------------------------
# Riemann solves
# ---------------------------------------------------------------------------


@dataclasses.dataclass(eq=False)
class RiemannSolution:
    """Decomposition of one edge jump into waves.

    ``left_fluctuation`` collects speed-weighted waves entering the left
    cell (negative speeds), ``right_fluctuation`` those entering the right
    cell. The limits are the one-sided trace states at the edge.
    """

    left_fluctuation: np.ndarray
    right_fluctuation: np.ndarray
    waves: list[tuple[float, float, np.ndarray]]
    left_limit: np.ndarray
    right_limit: np.ndarray


def solve_same_material(ws: WaveSet, Ql: np.ndarray, Qr: np.ndarray) -> RiemannSolution:
    """Riemann solve between two cells of one medium via energy projection."""
    dq = np.asarray(Qr, dtype=float) - np.asarray(Ql, dtype=float)
    beta = ws.vectors.T @ (ws.energy @ dq)
    h = ws.count // 2
    R_neg, R_pos = ws.vectors[:, :h], ws.vectors[:, h:]
    left = R_neg @ (ws.speeds[:h] * beta[:h])
    right = R_pos @ (ws.speeds[h:] * beta[h:])
    waves = [(float(ws.speeds[k]), float(beta[k]), ws.vectors[:, k])
             for k in range(ws.count)]
    return RiemannSolution(
        left_fluctuation=left,
        right_fluctuation=right,
        waves=waves,
        left_limit=np.asarray(Ql, dtype=float) + R_neg @ beta[:h],
        right_limit=np.asarray(Qr, dtype=float) - R_pos @ beta[h:],
    )


def interface_system(ctx: EdgeContext, ws_left: WaveSet | None = None,
                     ws_right: WaveSet | None = None) -> np.ndarray:
    """The square coupling matrix for the outgoing wave strengths."""
    if ws_left is None:
        ws_left = edge_eigensystem(ctx, "left")
    if ws_right is None:
        ws_right = edge_eigensystem(ctx, "right")
    C_l, C_r = interface_matrices(ctx)
    hl, hr = ws_left.count // 2, ws_right.count // 2
    return np.hstack([C_l @ ws_left.vectors[:, :hl],
                      C_r @ ws_right.vectors[:, hr:]])


def interface_condition_number(ctx: EdgeContext) -> float:
    """Condition number of the interface coupling system at this edge."""
    return cond_2norm(interface_system(ctx))


def solve_interface(ctx: EdgeContext, ws_left: WaveSet, ws_right: WaveSet,
                    Ql: np.ndarray, Qr: np.ndarray) -> RiemannSolution:
    """Riemann solve across dissimilar media via the trace conditions.

    Unknowns are the strengths of waves leaving the edge: the left
    medium's incoming-speed waves and the right medium's outgoing ones.
    """
    C_l, C_r = interface_matrices(ctx)
    hl, hr = ws_left.count // 2, ws_right.count // 2
    R_l = ws_left.vectors[:, :hl]
    R_r = ws_right.vectors[:, hr:]
    s_l = ws_left.speeds[:hl]
    s_r = ws_right.speeds[hr:]

    Ql = np.asarray(Ql, dtype=float)
    Qr = np.asarray(Qr, dtype=float)
    S = np.hstack([C_l @ R_l, C_r @ R_r])
    rhs = C_r @ Qr - C_l @ Ql
    try:
        beta = solve_lu(S, rhs)
    except SingularMatrixError as err:
        nx, nz = ctx.normal
        raise InterfaceConfigError(
            f"singular coupling system at a {ctx.interface_kind} edge between "
            f"'{ctx.label_left}' and '{ctx.label_right}' with normal "
            f"({nx:.6g}, {nz:.6g}), eta_d={ctx.eta_d:g}, zeta={ctx.zeta:g}"
        ) from err

    b_l, b_r = beta[:hl], beta[hl:]
    waves = [(float(s_l[k]), float(b_l[k]), R_l[:, k]) for k in range(hl)]
    waves += [(float(s_r[k]), float(b_r[k]), R_r[:, k]) for k in range(hr)]
    return RiemannSolution(
        left_fluctuation=R_l @ (s_l * b_l),
        right_fluctuation=R_r @ (s_r * b_r),
        waves=waves,
        left_limit=Ql + R_l @ b_l,
        right_limit=Qr - R_r @ b_r,
    )


def solve_edge(ctx: EdgeContext, Ql: np.ndarray, Qr: np.ndarray,
               cache: EigenCache | None = None) -> RiemannSolution:
    """Dispatch one edge to the matching solve, reusing cached eigensystems."""
    cache = _DEFAULT_CACHE if cache is None else cache
    ws_l, ws_r = cache.fetch(ctx)
    if ctx.interface_kind == "same":
        return solve_same_material(ws_l, Ql, Qr)
    return solve_interface(ctx, ws_l, ws_r, Ql, Qr)


def transverse_solve(ctx: EdgeContext, incoming: np.ndarray,
                     residence: str = "below") -> tuple[np.ndarray, np.ndarray]:
    """Split a fluctuation across a transverse edge into up/down parts.

    The transverse edge's normal points from the cell below ("left") to
    the cell above ("right"). ``residence`` names the side holding the
    incoming fluctuation; it matters only when the media differ, where
    each residence cell gets its own interface decomposition. Returns
    (up-going, down-going) parts, both scaled by the edge length ratio.
    """
    incoming = np.asarray(incoming, dtype=float)
    ratio = ctx.edge_ratio
    if ctx.interface_kind == "same":
        ws = edge_eigensystem(ctx, "left")
        beta = ws.vectors.T @ (ws.energy @ incoming)
        h = ws.count // 2
        down = ws.vectors[:, :h] @ (ws.speeds[:h] * beta[:h])
        up = ws.vectors[:, h:] @ (ws.speeds[h:] * beta[h:])
        return ratio * up, ratio * down
    if residence == "below":
        ql, qr = incoming, np.zeros(8)
    elif residence == "above":
        ql, qr = np.zeros(8), incoming
    else:
        raise ValueError(f"residence must be 'below' or 'above', got {residence!r}")
    ws_l = edge_eigensystem(ctx, "left")
    ws_r = edge_eigensystem(ctx, "right")
    sol = solve_interface(ctx, ws_l, ws_r, ql, qr)
    return ratio * sol.right_fluctuation, ratio * sol.left_fluctuation
