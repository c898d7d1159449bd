"""Dimensionally-unsplit wave-propagation time stepping on mapped grids.

One hyperbolic step accumulates, per cell, first-order fluctuations from
normal Riemann solves at its four edges, transverse correction fluctuations
from splitting every normal fluctuation at the two crossing edges of its
residence cell, and limited second-order correction terms.  Correction
fluctuations are one-sided: each edge carries separate plus (acting on the
higher-index cell) and minus (acting on the lower-index cell) accumulators,
which agree in a homogeneous medium but differ across dissimilar media.
Second-order terms are never formed across edges whose two cells carry
different materials.  The viscous drag source is applied by its exact
solution operator, composed with the hyperbolic step by Strang splitting.

Per-edge eigendecompositions for a grid are computed once and reused across
steps; edges between dissimilar materials get dense precomputed solve
operators so that stepping is pure linear algebra.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass

import numpy as np

from .linalg import solve_lu
from .materials import PoroMaterial, derive_scalars
from .riemann import (
    InterfaceConfigError,
    edge_context,
    edge_eigensystem,
    interface_matrices,
)

__all__ = [
    "SimulationState",
    "SolverConfigError",
    "StepConfig",
    "advance",
    "compute_dt",
    "fill_ghosts",
    "hyperbolic_step",
    "initialize_state",
    "strang_step",
    "viscous_substep",
]

_GH = 2  # ghost rings; matches the grid's build default
_NWAVE = 6  # wave slots per edge; fluid edges use two and pad with zeros


class SolverConfigError(ValueError):
    """Raised when a step configuration is inconsistent."""


@dataclass
class StepConfig:
    """Switches controlling one hyperbolic step."""

    cfl_target: float = 0.9
    limiter: str = "none"  # none | monotonized_centered
    transverse: bool = True
    second_order: str = "everywhere"  # everywhere | omit_at_material_interfaces
    #                                  | omit_on_line | off
    omit_line: int | None = None  # second-family edge index for omit_on_line
    boundary: str = "extrapolate_zero_order"  # or analytic_fill
    field: object | None = None  # callable (x, z, t) -> (..., 8)
    eta_d: float = 1.0
    zeta: float = 0.5
    splitting: str = "strang"

    def __post_init__(self):
        if not 0.0 < self.cfl_target <= 1.0:
            raise SolverConfigError("cfl_target must lie in (0, 1]")
        if self.limiter not in ("none", "monotonized_centered"):
            raise SolverConfigError(f"unknown limiter {self.limiter!r}")
        if self.second_order not in ("everywhere", "omit_at_material_interfaces",
                                     "omit_on_line", "off"):
            raise SolverConfigError(f"unknown second_order mode {self.second_order!r}")
        if self.second_order == "omit_on_line" and self.omit_line is None:
            raise SolverConfigError("omit_on_line requires omit_line")
        if self.boundary not in ("extrapolate_zero_order", "analytic_fill"):
            raise SolverConfigError(f"unknown boundary mode {self.boundary!r}")
        if self.splitting != "strang":
            raise SolverConfigError(f"unknown splitting {self.splitting!r}")


@dataclass
class SimulationState:
    """Cell-average state on a grid, with ghost rings included in storage."""

    grid: object
    q_ext: np.ndarray  # (N1 + 4, N2 + 4, 8)
    time: float = 0.0
    step: int = 0

    @property
    def q(self) -> np.ndarray:
        return self.q_ext[_GH:-_GH, _GH:-_GH]

    def copy(self) -> "SimulationState":
        return SimulationState(self.grid, self.q_ext.copy(), self.time, self.step)


def initialize_state(grid, fn=None, t0: float = 0.0) -> SimulationState:
    """New state with interior cells set to ``fn(x, z, t0)`` at centroids."""
    q_ext = np.zeros((grid.N1 + 2 * _GH, grid.N2 + 2 * _GH, 8))
    if fn is not None:
        c = grid.centroids
        q_ext[_GH:-_GH, _GH:-_GH] = fn(c[..., 0], c[..., 1], t0)
    return SimulationState(grid, q_ext, t0, 0)


# ---------------------------------------------------------------------------
# per-grid precomputed data
# ---------------------------------------------------------------------------


@dataclass
class _InterfaceEdge:
    """Dense solve operators for one edge between dissimilar materials.

    Normal solve: fluctuations are affine in the two cell states,
    A^- = ANL q_l + ANR q_r and A^+ = APL q_l + APR q_r (edge ratio not
    included).  Transverse splits carry the edge ratio folded in: with the
    incoming fluctuation residing below, up = TBU f and down = TBD f; above,
    up = TAU f and down = TAD f.
    """

    a: int
    b: int
    ANL: np.ndarray
    ANR: np.ndarray
    APL: np.ndarray
    APR: np.ndarray
    TBU: np.ndarray
    TBD: np.ndarray
    TAU: np.ndarray
    TAD: np.ndarray
    lam_max: float = 0.0


class _FamilyData:
    """Stacked eigendata for every edge of one family, natural grid layout.

    Arrays are indexed like the grid's extended edge arrays: entry (a, b) is
    the edge between cells (a-1, b) and (a, b) along the family axis.  Edges
    between dissimilar materials have zero rows here and are listed in
    ``records`` with their dense operators instead.
    """

    def __init__(self, shape):
        self.R = np.zeros(shape + (8, _NWAVE))
        self.WT = np.zeros(shape + (_NWAVE, 8))  # (E R)^T, projection rows
        self.lam = np.zeros(shape + (_NWAVE,))
        self.lam_max = np.zeros(shape)
        self.same = np.zeros(shape, dtype=bool)
        self.records: list[_InterfaceEdge] = []
        self.record_map: dict[tuple[int, int], _InterfaceEdge] = {}


def _build_family(grid, fam: int, eta_d: float, zeta: float) -> _FamilyData:
    mat_ext = grid.material_index_ext
    if fam == 1:
        normals = grid.normals1_ext
        ratios = grid.ratios1_ext
        ml = np.concatenate([mat_ext[:1], mat_ext], axis=0)
        mr = np.concatenate([mat_ext, mat_ext[-1:]], axis=0)
    else:
        normals = grid.normals2_ext
        ratios = grid.ratios2_ext
        ml = np.concatenate([mat_ext[:, :1], mat_ext], axis=1)
        mr = np.concatenate([mat_ext, mat_ext[:, -1:]], axis=1)

    data = _FamilyData(normals.shape[:2])
    data.ratio = ratios
    same = ml == mr
    data.same = same

    # group same-material edges by (material, normal) and solve each group once
    key = np.empty(normals.shape[:2],
                   dtype=[("m", np.int16), ("x", float), ("z", float)])
    key["m"] = ml
    key["x"] = normals[..., 0]
    key["z"] = normals[..., 1]
    flat_same = same.ravel()
    uniq, inverse = np.unique(key.ravel()[flat_same], return_inverse=True)
    idx_same = np.flatnonzero(flat_same)
    nshape = normals.shape[:2]
    R_flat = data.R.reshape(-1, 8, _NWAVE)
    WT_flat = data.WT.reshape(-1, _NWAVE, 8)
    lam_flat = data.lam.reshape(-1, _NWAVE)
    lmax_flat = data.lam_max.reshape(-1)
    for k, entry in enumerate(uniq):
        mat = grid.materials[int(entry["m"])]
        label = grid.labels[int(entry["m"])]
        normal = (float(entry["x"]), float(entry["z"]))
        ctx = edge_context(mat, mat, normal, eta_d=eta_d, zeta=zeta,
                           label_left=label, label_right=label)
        ws = edge_eigensystem(ctx, "left")
        members = idx_same[inverse == k]
        n = ws.count
        R_flat[members, :, :n] = ws.vectors
        WT_flat[members, :n, :] = (ws.energy @ ws.vectors).T
        lam_flat[members, :n] = ws.speeds
        lmax_flat[members] = abs(ws.speeds[-1])

    # dense operators for every dissimilar edge the sweeps can touch: one
    # fringe layer is skipped on each side (its zero rows are never read)
    for a, b in np.argwhere(~same):
        if not (1 <= a <= nshape[0] - 2 and 1 <= b <= nshape[1] - 2):
            continue
        mat_l = grid.materials[int(ml[a, b])]
        mat_r = grid.materials[int(mr[a, b])]
        normal = (float(normals[a, b, 0]), float(normals[a, b, 1]))
        try:
            rec = _interface_operators(
                a, b, mat_l, mat_r, normal, float(ratios[a, b]),
                grid.labels[int(ml[a, b])], grid.labels[int(mr[a, b])],
                eta_d, zeta)
        except (InterfaceConfigError, ValueError) as err:
            raise InterfaceConfigError(
                f"{err} (family-{fam} edge ({a - _GH}, {b - _GH}))") from err
        data.records.append(rec)
        data.record_map[(int(a), int(b))] = rec
        data.lam_max[a, b] = rec.lam_max
    return data


def _interface_operators(a, b, mat_l, mat_r, normal, ratio,
                         label_l, label_r, eta_d, zeta) -> _InterfaceEdge:
    ctx = edge_context(mat_l, mat_r, normal, eta_d=eta_d, zeta=zeta,
                       edge_ratio=ratio, label_left=label_l, label_right=label_r)
    ws_l = edge_eigensystem(ctx, "left")
    ws_r = edge_eigensystem(ctx, "right")
    C_l, C_r = interface_matrices(ctx)
    hl, hr = ws_l.count // 2, ws_r.count // 2
    R_ln = ws_l.vectors[:, :hl] * ws_l.speeds[:hl]
    R_rp = ws_r.vectors[:, hr:] * ws_r.speeds[hr:]
    S = np.hstack([C_l @ ws_l.vectors[:, :hl], C_r @ ws_r.vectors[:, hr:]])
    n = S.shape[0]
    eye = np.eye(n)
    Sinv = np.column_stack([solve_lu(S, eye[:, k]) for k in range(n)])
    Bl = -Sinv @ C_l  # jump-convention strengths from the left state
    Br = Sinv @ C_r
    # The normal-sweep operators below respond to the edge jump qr - ql, so
    # the left state enters negated. The transverse records instead respond
    # to a state perturbation on one side: a fluctuation residing in the
    # left cell perturbs ql itself, so its response matrix is +Sinv C_l.
    # Only with that sign do both residencies reduce to the plain
    # directional split when the contrast across the edge vanishes.
    rec = _InterfaceEdge(
        a=int(a), b=int(b),
        ANL=R_ln @ Bl[:hl], ANR=R_ln @ Br[:hl],
        APL=R_rp @ Bl[hl:], APR=R_rp @ Br[hl:],
        TBU=-ratio * (R_rp @ Bl[hl:]), TBD=-ratio * (R_ln @ Bl[:hl]),
        TAU=ratio * (R_rp @ Br[hl:]), TAD=ratio * (R_ln @ Br[:hl]),
    )
    rec.lam_max = max(abs(ws_l.speeds[0]), abs(ws_r.speeds[-1]))
    return rec


@dataclass
class _ViscousGroup:
    mask: np.ndarray  # interior cell mask
    cos_t: float
    sin_t: float
    rho_ratio: float  # rho_f / rho
    tau1: float
    tau3: float


class _GridOperators:
    """Everything precomputed for stepping on one grid at fixed (eta_d, zeta)."""

    def __init__(self, grid, eta_d: float, zeta: float):
        self.grid = grid
        self.eta_d = eta_d
        self.zeta = zeta
        self.fam1 = _build_family(grid, 1, eta_d, zeta)
        self.fam2 = _build_family(grid, 2, eta_d, zeta)
        self.kinv_ext = 1.0 / grid.capacities_ext
        self.viscous = self._viscous_groups(grid)

    @staticmethod
    def _viscous_groups(grid) -> list[_ViscousGroup]:
        groups = []
        for k, mat in enumerate(grid.materials):
            if not isinstance(mat, PoroMaterial) or mat.eta <= 0.0:
                continue
            sc = derive_scalars(mat)
            mask = grid.material_index == k
            if not mask.any():
                continue
            groups.append(_ViscousGroup(
                mask=mask, cos_t=math.cos(mat.theta), sin_t=math.sin(mat.theta),
                rho_ratio=mat.rho_f / sc.rho, tau1=sc.tau_d1, tau3=sc.tau_d3))
        return groups


_OPERATOR_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _operators_for(grid, eta_d: float, zeta: float) -> _GridOperators:
    per_grid = _OPERATOR_CACHE.setdefault(grid, {})
    key = (eta_d, zeta)
    if key not in per_grid:
        per_grid[key] = _GridOperators(grid, eta_d, zeta)
    return per_grid[key]


# ---------------------------------------------------------------------------
# ghost filling
# ---------------------------------------------------------------------------


def fill_ghosts(state: SimulationState, cfg: StepConfig,
                t: float | None = None) -> SimulationState:
    """Populate the two ghost rings in place and return the state."""
    q = state.q_ext
    if cfg.boundary == "extrapolate_zero_order":
        q[:_GH, :] = q[_GH:_GH + 1, :]
        q[-_GH:, :] = q[-_GH - 1:-_GH, :]
        q[:, :_GH] = q[:, _GH:_GH + 1]
        q[:, -_GH:] = q[:, -_GH - 1:-_GH]
        return state
    if cfg.field is None:
        raise SolverConfigError("analytic_fill boundary requires cfg.field")
    if t is None:
        t = state.time
    c = state.grid.centroids_ext
    for sl in ((slice(None, _GH), slice(None)), (slice(-_GH, None), slice(None)),
               (slice(None), slice(None, _GH)), (slice(None), slice(-_GH, None))):
        q[sl] = cfg.field(c[sl + (0,)], c[sl + (1,)], t)
    return state


# ---------------------------------------------------------------------------
# the hyperbolic sweep
# ---------------------------------------------------------------------------


def _mc_phi(theta: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, np.minimum(np.minimum(0.5 * (1.0 + theta), 2.0),
                                      2.0 * theta))


class _SweepResult:
    __slots__ = ("nf_plus", "nf_minus", "corr_own", "tv_plus", "tv_minus")


def _sweep(qe, own: _FamilyData, tv: _FamilyData, transposed: bool,
           dt: float, dxi_n: float, kinv, cfg: StepConfig,
           omit_line_ext: int | None) -> _SweepResult:
    """One family's normal solves, second-order terms, and transverse splits.

    Everything is phrased in the family's primary orientation: axis 0 runs
    across the edges (P cells), axis 1 along them (Q cells).  ``qe`` and
    ``kinv`` are extended cell arrays in that orientation; ``own`` holds this
    family's edge data and ``tv`` the crossing family's.  ``transposed``
    says whether primary orientation is the transpose of natural grid layout
    (true for the second family), which controls how edge records index into
    the orientation-local arrays.
    """
    P = qe.shape[0] - 4
    Q = qe.shape[1] - 4

    def _own(arr):
        return np.swapaxes(arr, 0, 1) if transposed else arr

    R = _own(own.R)
    WT = _own(own.WT)
    lam = _own(own.lam)
    ratio = _own(own.ratio)

    # normal solves at edges a in [1 .. P+3], all rows: strengths and
    # ratio-scaled fluctuations; interface edges are zero here and patched
    # from their dense operators below
    dq = qe[1:] - qe[:-1]  # (P+3, Q+4, 8), entry a-1 is edge a
    beta = np.matmul(WT[1:P + 4], dq[..., None])[..., 0]  # (P+3, Q+4, 6)
    lam_w = lam[1:P + 4]
    r_w = R[1:P + 4]
    ratio_w = ratio[1:P + 4]
    wpos = np.where(lam_w > 0.0, lam_w, 0.0) * beta
    wneg = np.where(lam_w < 0.0, lam_w, 0.0) * beta
    nf_plus = np.matmul(r_w, wpos[..., None])[..., 0] * ratio_w[..., None]
    nf_minus = np.matmul(r_w, wneg[..., None])[..., 0] * ratio_w[..., None]

    for rec in own.records:
        a, b = (rec.b, rec.a) if transposed else (rec.a, rec.b)
        ql = qe[a - 1, b]
        qr = qe[a, b]
        rt = ratio[a, b]
        nf_minus[a - 1, b] = rt * (rec.ANL @ ql + rec.ANR @ qr)
        nf_plus[a - 1, b] = rt * (rec.APL @ ql + rec.APR @ qr)

    out = _SweepResult()
    out.nf_plus = nf_plus
    out.nf_minus = nf_minus

    # second-order corrections at edges a in [2 .. P+2] bounding interior
    # cells, interior rows only; interface edges contribute nothing because
    # their strengths were never filled in
    out.corr_own = None
    if cfg.second_order != "off":
        sl_a = slice(1, P + 2)  # indices into the edge-window arrays above
        sl_b = slice(2, Q + 2)
        bet = beta[sl_a, sl_b]
        lm = lam_w[sl_a, sl_b]
        rr = r_w[sl_a, sl_b]
        shat = lm * ratio_w[sl_a, sl_b][..., None]
        if cfg.limiter == "monotonized_centered":
            # projection of the upwind edge's same-slot wave onto this one
            prev_dot = np.einsum("abik,abki->abk", r_w[0:P + 1, sl_b],
                                 WT[2:P + 3, sl_b])
            next_dot = np.einsum("abik,abki->abk", r_w[2:P + 3, sl_b],
                                 WT[2:P + 3, sl_b])
            num = np.where(lm > 0.0, beta[0:P + 1, sl_b] * prev_dot,
                           beta[2:P + 3, sl_b] * next_dot)
            theta = np.divide(num, bet, out=np.zeros_like(num),
                              where=bet != 0.0)
            bet = bet * _mc_phi(theta)
        kl = kinv[1:P + 2, 2:Q + 2]
        kr = kinv[2:P + 3, 2:Q + 2]
        coef = 0.5 * np.abs(shat) * (
            1.0 - (dt / dxi_n) * np.abs(shat) * (0.5 * (kl + kr))[..., None])
        if omit_line_ext is not None:
            entry = omit_line_ext - 2  # coef rows start at edge index 2
            if not 0 <= entry <= P:
                raise SolverConfigError(
                    f"omit_line {omit_line_ext - _GH} outside the grid")
            coef[entry, :, :] = 0.0
        out.corr_own = np.matmul(rr, (coef * bet)[..., None])[..., 0]

    # transverse splits: every fluctuation residing in cell (a, b) with
    # a in [2 .. P+2), b in [1 .. Q+3) is split at the cell's two crossing
    # edges; both of a cell's incoming fluctuations are summed first
    out.tv_plus = None
    out.tv_minus = None
    if cfg.transverse:
        T = nf_plus[1:P + 1, 1:Q + 3] + nf_minus[2:P + 2, 1:Q + 3]
        R_t = _own(tv.R)
        WT_t = _own(tv.WT)
        lam_t = _own(tv.lam)
        ratio_t = _own(tv.ratio)
        cN = dt / (2.0 * dxi_n)
        tv_plus = np.zeros(ratio_t.shape + (8,))
        tv_minus = np.zeros(ratio_t.shape + (8,))

        def _split(edge_a, edge_b):
            bt = np.matmul(WT_t[edge_a, edge_b], T[..., None])[..., 0]
            lm_t = lam_t[edge_a, edge_b]
            scale = ratio_t[edge_a, edge_b][..., None]
            up = np.matmul(R_t[edge_a, edge_b],
                           (np.where(lm_t > 0.0, lm_t, 0.0) * bt)[..., None]
                           )[..., 0] * scale
            down = np.matmul(R_t[edge_a, edge_b],
                             (np.where(lm_t < 0.0, lm_t, 0.0) * bt)[..., None]
                             )[..., 0] * scale
            return up, down

        # lower crossing edge (residence above it)
        up, down = _split(slice(2, P + 2), slice(1, Q + 3))
        tv_plus[2:P + 2, 1:Q + 3] += cN * up
        tv_minus[2:P + 2, 1:Q + 3] -= cN * down
        # upper crossing edge (residence below it)
        up, down = _split(slice(2, P + 2), slice(2, Q + 4))
        tv_minus[2:P + 2, 2:Q + 4] += cN * down
        tv_plus[2:P + 2, 2:Q + 4] -= cN * up

        for rec in tv.records:
            a, b = (rec.b, rec.a) if transposed else (rec.a, rec.b)
            if not 2 <= a < P + 2:
                continue
            if 1 <= b < Q + 3:  # residence above this crossing edge
                f = T[a - 2, b - 1]
                tv_plus[a, b] += cN * (rec.TAU @ f)
                tv_minus[a, b] -= cN * (rec.TAD @ f)
            if 1 <= b - 1 < Q + 3:  # residence below it
                f = T[a - 2, b - 2]
                tv_minus[a, b] += cN * (rec.TBD @ f)
                tv_plus[a, b] -= cN * (rec.TBU @ f)
        out.tv_plus = tv_plus
        out.tv_minus = tv_minus
    return out


def hyperbolic_step(state: SimulationState, dt: float,
                    cfg: StepConfig) -> SimulationState:
    """One full unsplit finite volume update of the interior cells."""
    grid = state.grid
    ops = _operators_for(grid, cfg.eta_d, cfg.zeta)
    N1, N2 = grid.N1, grid.N2
    work = state.copy()
    fill_ghosts(work, cfg)
    qe = work.q_ext
    kinv = ops.kinv_ext

    omit1 = None
    omit2 = None
    if cfg.second_order == "omit_on_line" and cfg.omit_line is not None:
        omit2 = cfg.omit_line + _GH  # vertical-direction fluxes along one line

    s1 = _sweep(qe, ops.fam1, ops.fam2, False, dt, grid.dxi1, kinv, cfg, omit1)
    s2 = _sweep(np.swapaxes(qe, 0, 1), ops.fam2, ops.fam1, True,
                dt, grid.dxi2, kinv.T, cfg, omit2)

    k_int = grid.capacities
    f1 = dt / (k_int * grid.dxi1)
    f2 = dt / (k_int * grid.dxi2)

    # both sweeps are complete, so the work copy can take the update in place
    q_new = work.q_ext
    qi = q_new[_GH:-_GH, _GH:-_GH]

    # first-order fluctuations: plus from the low edge, minus from the high
    # edge of each cell (window arrays start at edge index 1)
    qi -= f1[..., None] * (s1.nf_plus[1:N1 + 1, 2:N2 + 2]
                           + s1.nf_minus[2:N1 + 2, 2:N2 + 2])
    qi -= f2[..., None] * np.swapaxes(
        s2.nf_plus[1:N2 + 1, 2:N1 + 2] + s2.nf_minus[2:N2 + 2, 2:N1 + 2], 0, 1)

    # second-order corrections act like symmetric fluxes at both edge sides
    if s1.corr_own is not None:
        qi -= f1[..., None] * (s1.corr_own[1:N1 + 1] - s1.corr_own[0:N1])
    if s2.corr_own is not None:
        c2 = np.swapaxes(s2.corr_own, 0, 1)
        qi -= f2[..., None] * (c2[:, 1:N2 + 1] - c2[:, 0:N2])

    # transverse corrections: sweep-1 fluctuations feed family-2 correction
    # buffers and vice versa; minus acts on the cell below the crossing edge
    if s1.tv_plus is not None:
        qi -= f2[..., None] * (s1.tv_minus[2:N1 + 2, 3:N2 + 3]
                               - s1.tv_plus[2:N1 + 2, 2:N2 + 2])
    if s2.tv_plus is not None:
        tvp = np.swapaxes(s2.tv_plus, 0, 1)
        tvm = np.swapaxes(s2.tv_minus, 0, 1)
        qi -= f1[..., None] * (tvm[3:N1 + 3, 2:N2 + 2] - tvp[2:N1 + 2, 2:N2 + 2])

    return SimulationState(grid, q_new, state.time + dt, state.step + 1)


# ---------------------------------------------------------------------------
# viscous source, splitting, time step control
# ---------------------------------------------------------------------------


def viscous_substep(state: SimulationState, dt: float) -> SimulationState:
    """Exact solution operator of the drag source over an interval dt.

    In each poroelastic cell the relative flow decays per principal
    direction with its own time constant while total momentum per direction
    is conserved; stresses, pressure, and fluid cells are untouched.
    """
    groups = _viscous_groups_for(state.grid)
    if not groups:
        return SimulationState(state.grid, state.q_ext.copy(), state.time,
                               state.step)
    q_new = state.q_ext.copy()
    qi = q_new[_GH:-_GH, _GH:-_GH]
    for g in groups:
        vx = qi[..., 4][g.mask]
        vz = qi[..., 5][g.mask]
        qx = qi[..., 6][g.mask]
        qz = qi[..., 7][g.mask]
        c, s = g.cos_t, g.sin_t
        q1 = c * qx + s * qz
        q3 = -s * qx + c * qz
        v1 = c * vx + s * vz
        v3 = -s * vx + c * vz
        e1 = math.exp(-dt / g.tau1)
        e3 = math.exp(-dt / g.tau3)
        v1 = v1 + g.rho_ratio * q1 * (1.0 - e1)
        v3 = v3 + g.rho_ratio * q3 * (1.0 - e3)
        q1 = q1 * e1
        q3 = q3 * e3
        qi[..., 4][g.mask] = c * v1 - s * v3
        qi[..., 5][g.mask] = s * v1 + c * v3
        qi[..., 6][g.mask] = c * q1 - s * q3
        qi[..., 7][g.mask] = s * q1 + c * q3
    return SimulationState(state.grid, q_new, state.time, state.step)


_VISCOUS_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _viscous_groups_for(grid) -> list[_ViscousGroup]:
    if grid not in _VISCOUS_CACHE:
        _VISCOUS_CACHE[grid] = _GridOperators._viscous_groups(grid)
    return _VISCOUS_CACHE[grid]


def strang_step(state: SimulationState, dt: float,
                cfg: StepConfig) -> SimulationState:
    """Symmetric composition: half source, full hyperbolic step, half source."""
    half = viscous_substep(state, 0.5 * dt)
    full = hyperbolic_step(half, dt, cfg)
    return viscous_substep(full, 0.5 * dt)


def compute_dt(state: SimulationState, cfl_target: float = 0.9) -> float:
    """Largest stable time step for the grid's materials and geometry.

    The controlling measure per cell and direction is the fastest edge wave
    speed times the edge length ratio over capacity and computational
    spacing; the larger direction controls each cell.
    """
    grid = state.grid
    per_grid = _OPERATOR_CACHE.setdefault(grid, {})
    ops = next(iter(per_grid.values())) if per_grid else _operators_for(grid, 1.0, 0.5)
    g = _GH
    sm1 = ops.fam1.lam_max * ops.fam1.ratio
    sm2 = ops.fam2.lam_max * ops.fam2.ratio
    # per interior cell: the larger of its two edges in each direction
    e1 = np.maximum(sm1[g:-g - 1, g:-g], sm1[g + 1:-g, g:-g]) / grid.dxi1
    e2 = np.maximum(sm2[g:-g, g:-g - 1], sm2[g:-g, g + 1:-g]) / grid.dxi2
    rate = np.maximum(e1, e2) / grid.capacities
    return cfl_target / float(rate.max())


def advance(state: SimulationState, t_end: float, cfg: StepConfig,
            dt: float | None = None, on_step=None) -> SimulationState:
    """Step with Strang splitting from state.time to t_end.

    The step is chosen by rounding the CFL-limited step down so that a whole
    number of equal steps lands exactly on t_end.
    """
    span = t_end - state.time
    if span <= 0.0:
        return state
    if dt is None:
        dt = compute_dt(state, cfg.cfl_target)
    nsteps = max(1, math.ceil(span / dt - 1e-12))
    dt = span / nsteps
    for _ in range(nsteps):
        state = strang_step(state, dt, cfg)
        if on_step is not None:
            on_step(state)
    return state
