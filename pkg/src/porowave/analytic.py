"""Closed-form time-harmonic fields: plane waves and flat-interface scattering.

A single damped or undamped plane wave is an eigenpair of the directional
coefficient matrix; a flat interface turns one incident wave into a fan of
reflected and transmitted waves that share its tangential wavenumber. Both
reduce to one eigenproblem per medium,

    (omega E - k_t E Atan - i E D) V = k_n (E Bnorm) V,

where Atan and Bnorm are the directional coefficients along the interface
tangent and normal. The right-hand matrix is always singular: a tangential
relative-flow pattern and, in a porous medium, a pure tangential stress
carry no flux through the interface, and in a fluid five state slots have
no dynamics at all. Solving the problem naively is therefore fragile.
Instead the state is expanded in the medium's six (or two) propagating
wave shapes plus the explicitly known flux-null patterns; in that basis
the right matrix becomes diag(speeds) padded with zeros, the null block
condenses out, and what remains is a small dense eigenproblem handled by
the in-house complex QR solver.

Outgoing modes are picked by the sign of their average normal energy flux
when the normal wavenumber is essentially real, and by their decay
direction otherwise. The amplitude of each outgoing wave then follows from
the interface conditions, reusing the same trace matrices the finite
volume interface solver is built on.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .linalg import LinAlgError, complex_eigen, solve_lu
from .materials import FluidMaterial, PoroMaterial, global_coefficients
from .riemann import edge_context, edge_eigensystem, interface_matrices

__all__ = [
    "AnalyticError",
    "AnalyticField",
    "PlaneWaveSpec",
    "WaveComponent",
    "evaluate",
    "normal_energy_flux",
    "plane_wave",
    "reflect_transmit",
]

_FAMILIES_PORO = ("fast_P", "S", "slow_P")
_FAMILY_ACOUSTIC = "acoustic"

# |Im k| below this fraction of |k| counts as propagating; then the flux
# sign decides whether the mode is outgoing, otherwise its decay direction
_PROPAGATING_TOL = 1e-8


class AnalyticError(ValueError):
    """A closed-form field cannot be built from the given data."""


@dataclasses.dataclass(frozen=True)
class PlaneWaveSpec:
    """One time-harmonic plane wave: frequency, direction, branch, medium."""

    omega: float
    direction: tuple[float, float]
    family: str
    material: PoroMaterial | FluidMaterial
    viscous: bool = False

    def __post_init__(self):
        if not self.omega > 0.0:
            raise AnalyticError(f"angular frequency {self.omega!r} must be positive")
        px, pz = self.direction
        if abs(math.hypot(px, pz) - 1.0) > 1e-12:
            raise AnalyticError(f"direction ({px!r}, {pz!r}) is not unit length")
        fluid = isinstance(self.material, FluidMaterial)
        if fluid and self.family != _FAMILY_ACOUSTIC:
            raise AnalyticError(
                f"family {self.family!r} does not exist in a fluid; only "
                f"{_FAMILY_ACOUSTIC!r} does")
        if not fluid and self.family not in _FAMILIES_PORO:
            raise AnalyticError(
                f"family {self.family!r} unknown in a porous medium; expected "
                f"one of {_FAMILIES_PORO}")


@dataclasses.dataclass(frozen=True, eq=False)
class WaveComponent:
    """One complex-exponential term of a scattering field.

    ``V`` has unit energy norm; ``beta`` is its complex amplitude in the
    assembled field; ``kvec`` is the full complex wavevector, equal to
    k_t * tangent + k_normal * normal of the owning field.
    """

    V: np.ndarray
    k_normal: complex
    beta: complex
    kvec: tuple[complex, complex]

    def __post_init__(self):
        self.V.setflags(write=False)


@dataclasses.dataclass(frozen=True, eq=False)
class AnalyticField:
    """Incident plus outgoing plane waves around one flat interface.

    The interface passes through ``point`` with unit ``tangent`` and unit
    ``normal``; the normal points from the incident medium into the
    transmitted one, so the incident side is where the signed normal
    distance is negative.
    """

    omega: float
    k_t: complex
    point: tuple[float, float]
    tangent: tuple[float, float]
    normal: tuple[float, float]
    material_in: PoroMaterial | FluidMaterial
    material_out: PoroMaterial | FluidMaterial
    interface_kind: str
    eta_d: float
    zeta: float
    incident: WaveComponent
    reflected: tuple[WaveComponent, ...]
    transmitted: tuple[WaveComponent, ...]

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega


def _normalize_mode(v: np.ndarray, E: np.ndarray) -> np.ndarray:
    nrm = math.sqrt(float(np.real(np.conj(v) @ E @ v)))
    if nrm == 0.0:
        raise AnalyticError("degenerate mode with zero energy norm")
    v = v / nrm
    lead = int(np.argmax(np.abs(v)))
    phase = v[lead] / abs(v[lead])
    return v * np.conj(phase)


def _null_basis(coeffs, tangent) -> np.ndarray:
    """Flux-free state patterns for the normal coefficient matrix.

    A relative flow along the tangent moves no volume through the
    interface and appears in no stress rate; in a porous medium the pure
    tangential stress t t^T exerts no traction on the interface either.
    Columns are normalized to unit energy (they are energy-orthogonal to
    each other and to every propagating shape by symmetry).
    """
    tx, tz = tangent
    slip = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, tx, tz])
    if coeffs.kind == "fluid":
        cols = [slip]
    else:
        cols = [np.array([0.0, tx * tx, tz * tz, tx * tz, 0.0, 0.0, 0.0, 0.0]),
                slip]
    E = coeffs.E8()
    return np.stack([w / math.sqrt(float(w @ E @ w)) for w in cols], axis=1)


def _directional_modes(mat, tangent, normal, k_t: complex, omega: float):
    """All normal-wavenumber eigenpairs at fixed tangential wavenumber.

    Returns (modes, E Bnorm) where modes is a list of (k_n, V) with V of
    unit energy norm, six entries for a porous medium and two for a fluid.
    """
    coeffs = global_coefficients(mat)
    E = coeffs.E8()
    Bn = coeffs.directional(*normal)
    At = coeffs.directional(*tangent)

    ws = edge_eigensystem(edge_context(mat, mat, normal), "left")
    R = ws.vectors
    lam = ws.speeds
    W = _null_basis(coeffs, tangent)
    if np.abs(Bn @ W).max() > 1e-12 * np.abs(Bn).max():
        raise AnalyticError("flux-null basis is not in the kernel of the "
                            "normal coefficient matrix")

    G = np.hstack([R, W])
    ML = omega * E - k_t * (E @ At) - 1j * (E @ coeffs.D8())
    M = G.T @ ML @ G
    nw = R.shape[1]
    Mzz = M[nw:, nw:]
    try:
        Z = solve_lu(Mzz, M[nw:, :nw])
    except LinAlgError as exc:
        raise AnalyticError(
            f"flux-null block is singular at k_t = {k_t!r}") from exc
    S = M[:nw, :nw] - M[:nw, nw:] @ Z
    kvals, Y = complex_eigen(S / lam[:, None])
    V = R @ Y - W @ (Z @ Y)
    EBn = E @ Bn
    return [(complex(kvals[j]), _normalize_mode(V[:, j], E))
            for j in range(nw)], EBn


def _outgoing(k_n: complex, v: np.ndarray, EBn: np.ndarray, side: float) -> bool:
    """Does mode (k_n, v) leave the interface toward normal-side ``side``?"""
    if abs(k_n.imag) < _PROPAGATING_TOL * abs(k_n):
        flux = float(np.real(np.conj(v) @ EBn @ v))
        return flux * side > 0.0
    return k_n.imag * side > 0.0


def plane_wave(spec: PlaneWaveSpec) -> tuple[complex, np.ndarray, float]:
    """Wavenumber, unit-energy complex shape, and period of one plane wave.

    Solves -i omega V + i k (p_x A + p_z B) V = D V along the requested
    direction. Without drag the wavenumber is omega over the directional
    wave speed and the shape is the corresponding real eigenvector; with
    drag the damped eigenproblem is solved and the branch of matching
    position in the wavenumber ordering is returned, with Im(k) >= 0 so
    the wave decays along its travel direction.
    """
    mat = spec.material
    px, pz = spec.direction
    nrm = math.hypot(px, pz)
    p = (px / nrm, pz / nrm)
    omega = spec.omega

    damped = (spec.viscous and isinstance(mat, PoroMaterial) and mat.eta > 0.0)
    if not damped:
        ws = edge_eigensystem(edge_context(mat, mat, p), "left")
        if isinstance(mat, FluidMaterial):
            col = 1
        else:
            col = {"slow_P": 3, "S": 4, "fast_P": 5}[spec.family]
        k = complex(omega / ws.speeds[col])
        E = global_coefficients(mat).E8()
        return k, _normalize_mode(ws.vectors[:, col].astype(complex), E), \
            2.0 * math.pi / omega

    tangent = (-p[1], p[0])
    modes, EBn = _directional_modes(mat, tangent, p, 0.0, omega)
    forward = [(k, v) for k, v in modes if _outgoing(k, v, EBn, 1.0)]
    if len(forward) != 3:
        raise AnalyticError(
            f"expected 3 forward damped branches, found {len(forward)}")
    forward.sort(key=lambda kv: kv[0].real)
    k, v = forward[{"fast_P": 0, "S": 1, "slow_P": 2}[spec.family]]
    return k, v, 2.0 * math.pi / omega


def reflect_transmit(upper, lower, incident: PlaneWaveSpec, *,
                     interface_kind: str | None = None, eta_d: float = 1.0,
                     zeta: float = 0.5,
                     interface_z: float = 0.0) -> AnalyticField:
    """Scatter one plane wave at the flat horizontal contact of two media.

    The interface is the line z = interface_z with ``upper`` above and
    ``lower`` below. The incident wave must travel toward it, so its side
    follows from the sign of the vertical direction component, and its
    material must be that side's medium. Outgoing modes per side come from
    the fixed-tangential-wavenumber eigenproblem; their amplitudes solve
    the interface conditions written with the same trace matrices the
    finite volume scheme uses, which makes the returned field an exact
    steady solution of the discretized jump relations as well.
    """
    px, pz = incident.direction
    if pz < 0.0:
        mat_in, mat_out, m = upper, lower, (0.0, -1.0)
    elif pz > 0.0:
        mat_in, mat_out, m = lower, upper, (0.0, 1.0)
    else:
        raise AnalyticError("incident wave runs parallel to the interface")
    if incident.material != mat_in:
        side = "upper" if pz < 0.0 else "lower"
        raise AnalyticError(
            f"incident material is not the {side} medium its direction "
            f"starts in")
    t = (1.0, 0.0)

    k_in, v_in, _ = plane_wave(incident)
    k_t = k_in * (px * t[0] + pz * t[1])
    k_n_in = k_in * (px * m[0] + pz * m[1])

    if interface_kind is None and mat_in == mat_out:
        # identical media still scatter through the full interface system
        interface_kind = ("fluid_fluid" if isinstance(mat_in, FluidMaterial)
                          else "poro_poro")
    ctx = edge_context(mat_in, mat_out, m, eta_d=eta_d, zeta=zeta,
                       interface_kind=interface_kind,
                       label_left="incident side", label_right="far side")
    C_in, C_out = interface_matrices(ctx)

    modes_in, EBn_in = _directional_modes(mat_in, t, m, k_t, incident.omega)
    modes_out, EBn_out = _directional_modes(mat_out, t, m, k_t, incident.omega)
    refl = [(k, v) for k, v in modes_in if _outgoing(k, v, EBn_in, -1.0)]
    trans = [(k, v) for k, v in modes_out if _outgoing(k, v, EBn_out, 1.0)]

    def order(kv):
        return (abs(kv[0].real), abs(kv[0].imag))

    refl.sort(key=order)
    trans.sort(key=order)

    nrows = C_in.shape[0]
    if len(refl) + len(trans) != nrows:
        raise AnalyticError(
            f"{len(refl)} reflected and {len(trans)} transmitted modes do "
            f"not close the {nrows} interface conditions")

    cols = [-C_in @ v for _, v in refl] + [C_out @ v for _, v in trans]
    try:
        beta = solve_lu(np.stack(cols, axis=1), C_in @ v_in)
    except LinAlgError as exc:
        raise AnalyticError("interface amplitude system is singular") from exc

    def component(k_n, v, b):
        kvec = (k_t * t[0] + k_n * m[0], k_t * t[1] + k_n * m[1])
        return WaveComponent(V=v, k_normal=complex(k_n), beta=complex(b),
                             kvec=kvec)

    incident_wave = component(k_n_in, v_in, 1.0)
    reflected = tuple(component(k, v, beta[j])
                      for j, (k, v) in enumerate(refl))
    transmitted = tuple(component(k, v, beta[len(refl) + j])
                        for j, (k, v) in enumerate(trans))
    return AnalyticField(
        omega=incident.omega, k_t=complex(k_t),
        point=(0.0, float(interface_z)), tangent=t, normal=m,
        material_in=mat_in, material_out=mat_out,
        interface_kind=ctx.interface_kind, eta_d=eta_d, zeta=zeta,
        incident=incident_wave, reflected=reflected, transmitted=transmitted)


def evaluate(field: AnalyticField, x, z, t) -> np.ndarray:
    """Real state vector of the field at points (x, z) and time t.

    Inputs broadcast together; the result carries one trailing axis of
    length 8. Each point is served by its own side of the interface, so
    evanescent members only ever decay and far-field evaluation underflows
    harmlessly to zero. A damped incident wave does grow without bound far
    up-tangent; that is a property of the plane-wave ansatz itself.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    t = np.asarray(t, dtype=float)
    shape = np.broadcast_shapes(x.shape, z.shape, t.shape)
    xb = np.broadcast_to(x, shape)
    zb = np.broadcast_to(z, shape)
    tb = np.broadcast_to(t, shape)

    px, pz = field.point
    d = (xb - px) * field.normal[0] + (zb - pz) * field.normal[1]
    out = np.zeros(shape + (8,))
    sides = ((d < 0.0, (field.incident, *field.reflected)),
             (d >= 0.0, field.transmitted))
    for mask, waves in sides:
        if not np.any(mask):
            continue
        xs, zs, ts = xb[mask], zb[mask], tb[mask]
        acc = np.zeros(xs.shape + (8,), dtype=complex)
        for w in waves:
            phase = np.exp(1j * (w.kvec[0] * xs + w.kvec[1] * zs
                                 - field.omega * ts))
            acc += (w.beta * phase)[..., None] * w.V
        out[mask] = acc.real
    return out


def normal_energy_flux(v, material, normal, omega: float,
                       samples: int = 64) -> float:
    """Average energy flux of Re(v e^{-i omega t}) along ``normal``.

    Integrates the instantaneous quadratic flux over one period with the
    trapezoid rule on ``samples`` intervals, which is exact here up to
    roundoff. Positive means transport toward the normal direction.
    """
    coeffs = global_coefficients(material)
    M = coeffs.E8() @ coeffs.directional(*normal)
    v = np.asarray(v, dtype=complex)
    period = 2.0 * math.pi / omega
    ts = np.linspace(0.0, period, samples + 1)
    qs = np.real(np.exp(-1j * omega * ts)[:, None] * v[None, :])
    f = np.einsum("ti,ij,tj->t", qs, M, qs)
    dt = period / samples
    return float(dt * (0.5 * f[0] + f[1:-1].sum() + 0.5 * f[-1]) / period)
