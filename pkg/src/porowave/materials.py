"""Material models: orthotropic porous solids and inviscid fluids.

A porous material is described by its drained skeleton stiffnesses, grain
and fluid properties, porosity, permeabilities and tortuosities along the
two in-plane principal directions, and the angle the first principal axis
makes with the global x axis. From these we derive the inertia and storage
parameters the governing first-order system needs, and assemble its
coefficient blocks.

The 8-component state vector ordering used everywhere in this package is

    (p, tau_xx, tau_zz, tau_xz, v_x, v_z, q_x, q_z)

with p the pore (or fluid) pressure, tau the total stress, v the solid
velocity and q the relative fluid discharge velocity. Fluid media reuse the
same layout with the five solid slots (indices 1..5) identically zero and
q acting as the fluid velocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MaterialError",
    "PoroMaterial",
    "FluidMaterial",
    "DerivedScalars",
    "CoefficientSet",
    "derive_scalars",
    "poro_coefficients",
    "fluid_coefficients",
    "rotate_to_global",
    "state_rotation",
    "global_coefficients",
    "BUILTIN",
]

# state-vector slots that stay identically zero inside a fluid medium
FLUID_DEAD_SLOTS = (1, 2, 3, 4, 5)


class MaterialError(ValueError):
    """Material parameters outside the physically meaningful range."""


@dataclass(frozen=True)
class PoroMaterial:
    """Orthotropic porous medium (SI units throughout).

    ``c11..c55`` are drained stiffnesses in Pa with principal axis 1 along
    the local x direction; ``theta`` rotates that axis counterclockwise
    relative to global x. Tortuosities are expected to be >= 1 and porosity
    strictly inside (0, 1); violations surface as MaterialError from
    derive_scalars when they make the inertia or storage parameters
    unphysical.
    """

    K_s: float
    rho_s: float
    c11: float
    c12: float
    c13: float
    c33: float
    c55: float
    phi: float
    kappa1: float
    kappa3: float
    T1: float
    T3: float
    K_f: float
    rho_f: float
    eta: float
    theta: float = 0.0

    def __post_init__(self):
        positive = {
            "K_s": self.K_s, "rho_s": self.rho_s, "c55": self.c55,
            "kappa1": self.kappa1, "kappa3": self.kappa3,
            "K_f": self.K_f, "rho_f": self.rho_f,
        }
        for name, value in positive.items():
            if not value > 0.0:
                raise MaterialError(f"{name} must be positive, got {value}")
        if not 0.0 < self.phi < 1.0:
            raise MaterialError(f"porosity must lie in (0, 1), got {self.phi}")
        if self.eta < 0.0:
            raise MaterialError(f"viscosity must be nonnegative, got {self.eta}")


@dataclass(frozen=True)
class FluidMaterial:
    """Inviscid fluid: bulk modulus (Pa) and density (kg/m^3)."""

    K_f: float
    rho_f: float

    def __post_init__(self):
        if not (self.K_f > 0.0 and self.rho_f > 0.0):
            raise MaterialError("fluid modulus and density must be positive")

    @property
    def sound_speed(self) -> float:
        return math.sqrt(self.K_f / self.rho_f)

    @property
    def impedance(self) -> float:
        return self.rho_f * self.sound_speed


@dataclass(frozen=True)
class DerivedScalars:
    """Scalars derived from a PoroMaterial; see derive_scalars."""

    rho: float
    m1: float
    m3: float
    Delta1: float
    Delta3: float
    alpha1: float
    alpha3: float
    Kbar: float
    M: float
    c11u: float
    c13u: float
    c33u: float
    c55u: float
    tau_d1: float
    tau_d3: float
    c_pf1: float
    c_s1: float
    c_ps1: float
    c_pf3: float
    c_s3: float
    c_ps3: float


def _inplane_p_speeds(M, alpha, ciiu, rho, rho_f, m, Delta):
    # 2x2 reduced system for the coupled compressional modes along one
    # principal axis; returns (fast, slow) speeds
    a = M * (rho - alpha * rho_f) / Delta
    b = M * (rho_f - alpha * m) / Delta
    c = (ciiu * rho_f - alpha * M * rho) / Delta
    d = (ciiu * m - alpha * M * rho_f) / Delta
    tr = a + d
    disc = (a - d) ** 2 + 4.0 * b * c
    if disc < 0.0:
        raise MaterialError("complex compressional wave speeds")
    root = math.sqrt(disc)
    c2_fast = 0.5 * (tr + root)
    c2_slow = 0.5 * (tr - root)
    if c2_slow <= 0.0:
        raise MaterialError("nonpositive compressional wave speed")
    return math.sqrt(c2_fast), math.sqrt(c2_slow)


def derive_scalars(mat: PoroMaterial) -> DerivedScalars:
    """Bulk density, effective inertias, storage and stiffness parameters,
    dissipation time constants, and principal-direction wave speeds.

    Raises MaterialError when the inertia determinant rho*m_i - rho_f^2 or
    the storage-modulus denominator is not positive, or when the implied
    wave speeds are not real, positive and ordered fast-P > S > slow-P.
    """
    rho = (1.0 - mat.phi) * mat.rho_s + mat.phi * mat.rho_f
    m1 = mat.T1 * mat.rho_f / mat.phi
    m3 = mat.T3 * mat.rho_f / mat.phi
    Delta1 = rho * m1 - mat.rho_f**2
    Delta3 = rho * m3 - mat.rho_f**2
    if Delta1 <= 0.0 or Delta3 <= 0.0:
        raise MaterialError(
            f"inertia determinant must be positive (got {Delta1:g}, {Delta3:g})"
        )

    # effective stress coefficients with the transversely isotropic
    # completion c22 = c11, c23 = c13
    c22 = mat.c11
    c23 = mat.c13
    alpha1 = 1.0 - (mat.c11 + mat.c12 + mat.c13) / (3.0 * mat.K_s)
    alpha3 = 1.0 - (mat.c13 + c23 + mat.c33) / (3.0 * mat.K_s)
    Kbar = (mat.c11 + c22 + mat.c33 + 2.0 * (mat.c12 + mat.c13 + c23)) / 9.0
    denom = (1.0 - Kbar / mat.K_s) - mat.phi * (1.0 - mat.K_s / mat.K_f)
    if denom <= 0.0:
        raise MaterialError(
            f"storage modulus denominator must be positive (got {denom:g})"
        )
    M = mat.K_s / denom

    c11u = mat.c11 + M * alpha1 * alpha1
    c13u = mat.c13 + M * alpha1 * alpha3
    c33u = mat.c33 + M * alpha3 * alpha3
    c55u = mat.c55

    if mat.eta > 0.0:
        tau_d1 = Delta1 * mat.kappa1 / (rho * mat.eta)
        tau_d3 = Delta3 * mat.kappa3 / (rho * mat.eta)
    else:
        tau_d1 = math.inf
        tau_d3 = math.inf

    c_pf1, c_ps1 = _inplane_p_speeds(M, alpha1, c11u, rho, mat.rho_f, m1, Delta1)
    c_pf3, c_ps3 = _inplane_p_speeds(M, alpha3, c33u, rho, mat.rho_f, m3, Delta3)
    # shear propagating along axis 1 is polarized along axis 3 and carries
    # the direction-3 inertia pair, and vice versa
    c_s1 = math.sqrt(c55u * m3 / Delta3)
    c_s3 = math.sqrt(c55u * m1 / Delta1)

    for cpf, cs, cps in ((c_pf1, c_s1, c_ps1), (c_pf3, c_s3, c_ps3)):
        if not (cpf > cs > cps > 0.0):
            raise MaterialError(
                f"wave speeds out of order: pf={cpf:g} s={cs:g} ps={cps:g}"
            )

    return DerivedScalars(
        rho=rho, m1=m1, m3=m3, Delta1=Delta1, Delta3=Delta3,
        alpha1=alpha1, alpha3=alpha3, Kbar=Kbar, M=M,
        c11u=c11u, c13u=c13u, c33u=c33u, c55u=c55u,
        tau_d1=tau_d1, tau_d3=tau_d3,
        c_pf1=c_pf1, c_s1=c_s1, c_ps1=c_ps1,
        c_pf3=c_pf3, c_s3=c_s3, c_ps3=c_ps3,
    )


@dataclass(frozen=True)
class CoefficientSet:
    """Coefficient blocks of the first-order system for one medium.

    The governing system is dQ/dt + A dQ/dx + B dQ/dz = D Q with

        A = [[0, A_sv], [A_vs, 0]],  B likewise,  D = [[0, 0], [0, D_v]],

    split over the stress-like slots (p, tau_xx, tau_zz, tau_xz) and the
    velocity-like slots (v_x, v_z, q_x, q_z). E_s and E_v are the matching
    diagonal blocks of the energy quadratic form. The blocks satisfy
    E_s @ A_sv == (E_v @ A_vs)^T (same for B), which is what makes the
    system symmetrizable; construction enforces it to 1e-12 relative.
    """

    A_sv: np.ndarray
    A_vs: np.ndarray
    B_sv: np.ndarray
    B_vs: np.ndarray
    D_v: np.ndarray
    E_s: np.ndarray
    E_v: np.ndarray
    axes: str = "principal"
    kind: str = "poroelastic"

    def __post_init__(self):
        for name in ("A_sv", "A_vs", "B_sv", "B_vs", "D_v", "E_s", "E_v"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for sv, vs in ((self.A_sv, self.A_vs), (self.B_sv, self.B_vs)):
            lhs = self.E_s @ sv
            rhs = (self.E_v @ vs).T
            scale = max(np.abs(lhs).max(), np.abs(rhs).max(), 1e-300)
            if np.abs(lhs - rhs).max() > 1e-12 * scale:
                raise MaterialError("coefficient blocks break the energy symmetry")

    def A8(self) -> np.ndarray:
        out = np.zeros((8, 8))
        out[:4, 4:] = self.A_sv
        out[4:, :4] = self.A_vs
        return out

    def B8(self) -> np.ndarray:
        out = np.zeros((8, 8))
        out[:4, 4:] = self.B_sv
        out[4:, :4] = self.B_vs
        return out

    def D8(self) -> np.ndarray:
        out = np.zeros((8, 8))
        out[4:, 4:] = self.D_v
        return out

    def E8(self) -> np.ndarray:
        out = np.zeros((8, 8))
        out[:4, :4] = self.E_s
        out[4:, 4:] = self.E_v
        return out

    def directional(self, nx: float, nz: float) -> np.ndarray:
        """Assembled 8x8 coefficient of the directional derivative n.grad."""
        out = np.zeros((8, 8))
        out[:4, 4:] = nx * self.A_sv + nz * self.B_sv
        out[4:, :4] = nx * self.A_vs + nz * self.B_vs
        return out


def poro_coefficients(mat: PoroMaterial) -> CoefficientSet:
    """Coefficient blocks of a porous medium in its principal axes."""
    den = mat.c11 * mat.c33 - mat.c13**2
    if den <= 0.0:
        raise MaterialError(
            "drained stiffness submatrix [[c11, c13], [c13, c33]] must be "
            f"positive definite (determinant {den:g})"
        )
    d = derive_scalars(mat)
    M, a1, a3 = d.M, d.alpha1, d.alpha3

    A_sv = np.array([
        [a1 * M, 0.0, M, 0.0],
        [-d.c11u, 0.0, -a1 * M, 0.0],
        [-d.c13u, 0.0, -a3 * M, 0.0],
        [0.0, -d.c55u, 0.0, 0.0],
    ])
    B_sv = np.array([
        [0.0, a3 * M, 0.0, M],
        [0.0, -d.c13u, 0.0, -a1 * M],
        [0.0, -d.c33u, 0.0, -a3 * M],
        [-d.c55u, 0.0, 0.0, 0.0],
    ])
    A_vs = np.array([
        [-mat.rho_f / d.Delta1, -d.m1 / d.Delta1, 0.0, 0.0],
        [0.0, 0.0, 0.0, -d.m3 / d.Delta3],
        [d.rho / d.Delta1, mat.rho_f / d.Delta1, 0.0, 0.0],
        [0.0, 0.0, 0.0, mat.rho_f / d.Delta3],
    ])
    B_vs = np.array([
        [0.0, 0.0, 0.0, -d.m1 / d.Delta1],
        [-mat.rho_f / d.Delta3, 0.0, -d.m3 / d.Delta3, 0.0],
        [0.0, 0.0, 0.0, mat.rho_f / d.Delta1],
        [d.rho / d.Delta3, 0.0, mat.rho_f / d.Delta3, 0.0],
    ])

    r1 = mat.rho_f * mat.eta / (d.Delta1 * mat.kappa1)
    r3 = mat.rho_f * mat.eta / (d.Delta3 * mat.kappa3)
    s1 = d.rho * mat.eta / (d.Delta1 * mat.kappa1)
    s3 = d.rho * mat.eta / (d.Delta3 * mat.kappa3)
    D_v = np.array([
        [0.0, 0.0, r1, 0.0],
        [0.0, 0.0, 0.0, r3],
        [0.0, 0.0, -s1, 0.0],
        [0.0, 0.0, 0.0, -s3],
    ])

    # energy block over (p, tau_xx, tau_zz, tau_xz): drained compliances
    # plus the pressure-storage coupling
    e11 = 1.0 / M + (a1**2 * mat.c33 + a3**2 * mat.c11 - 2 * a1 * a3 * mat.c13) / den
    e12 = (a1 * mat.c33 - a3 * mat.c13) / den
    e13 = (a3 * mat.c11 - a1 * mat.c13) / den
    E_s = np.array([
        [e11, e12, e13, 0.0],
        [e12, mat.c33 / den, -mat.c13 / den, 0.0],
        [e13, -mat.c13 / den, mat.c11 / den, 0.0],
        [0.0, 0.0, 0.0, 1.0 / mat.c55],
    ])
    E_v = np.array([
        [d.rho, 0.0, mat.rho_f, 0.0],
        [0.0, d.rho, 0.0, mat.rho_f],
        [mat.rho_f, 0.0, d.m1, 0.0],
        [0.0, mat.rho_f, 0.0, d.m3],
    ])

    return CoefficientSet(A_sv, A_vs, B_sv, B_vs, D_v, E_s, E_v,
                          axes="principal", kind="poroelastic")


def fluid_coefficients(mat: FluidMaterial) -> CoefficientSet:
    """Coefficient blocks of an inviscid fluid in the shared state layout.

    Only the pressure <-> discharge couplings are populated; everything
    else, including D, is zero, and the energy form is supported on the
    pressure and discharge slots alone.
    """
    A_sv = np.zeros((4, 4))
    A_sv[0, 2] = mat.K_f
    B_sv = np.zeros((4, 4))
    B_sv[0, 3] = mat.K_f
    A_vs = np.zeros((4, 4))
    A_vs[2, 0] = 1.0 / mat.rho_f
    B_vs = np.zeros((4, 4))
    B_vs[3, 0] = 1.0 / mat.rho_f
    E_s = np.zeros((4, 4))
    E_s[0, 0] = 1.0 / mat.K_f
    E_v = np.zeros((4, 4))
    E_v[2, 2] = mat.rho_f
    E_v[3, 3] = mat.rho_f
    return CoefficientSet(A_sv, A_vs, B_sv, B_vs, np.zeros((4, 4)), E_s, E_v,
                          axes="principal", kind="fluid")


def state_rotation(theta: float) -> np.ndarray:
    """8x8 transformation taking principal-axes state components to axes
    rotated by -theta (i.e. the components of the same physical state seen
    in a frame where the material axes sit at angle theta)."""
    c, s = math.cos(theta), math.sin(theta)
    T = np.zeros((8, 8))
    T[0, 0] = 1.0
    # rank-2 tensor components (tau_xx, tau_zz, tau_xz)
    T[1, 1], T[1, 2], T[1, 3] = c * c, s * s, -2.0 * c * s
    T[2, 1], T[2, 2], T[2, 3] = s * s, c * c, 2.0 * c * s
    T[3, 1], T[3, 2], T[3, 3] = c * s, -c * s, c * c - s * s
    # vector components
    T[4, 4], T[4, 5] = c, -s
    T[5, 4], T[5, 5] = s, c
    T[6, 6], T[6, 7] = c, -s
    T[7, 6], T[7, 7] = s, c
    return T


def rotate_to_global(coeffs: CoefficientSet, theta: float) -> CoefficientSet:
    """Express principal-axes coefficient blocks in global axes, for a
    material whose first principal axis sits at angle theta from global x.
    """
    c, s = math.cos(theta), math.sin(theta)
    T = state_rotation(theta)
    Ti = state_rotation(-theta)
    Ts, Tv = T[:4, :4], T[4:, 4:]
    Tsi, Tvi = Ti[:4, :4], Ti[4:, 4:]

    A_sv = Ts @ coeffs.A_sv @ Tvi
    B_sv = Ts @ coeffs.B_sv @ Tvi
    A_vs = Tv @ coeffs.A_vs @ Tsi
    B_vs = Tv @ coeffs.B_vs @ Tsi
    return CoefficientSet(
        A_sv=c * A_sv - s * B_sv,
        A_vs=c * A_vs - s * B_vs,
        B_sv=s * A_sv + c * B_sv,
        B_vs=s * A_vs + c * B_vs,
        D_v=Tv @ coeffs.D_v @ Tvi,
        E_s=Tsi.T @ coeffs.E_s @ Tsi,
        E_v=Tvi.T @ coeffs.E_v @ Tvi,
        axes="global",
        kind=coeffs.kind,
    )


def global_coefficients(mat: PoroMaterial | FluidMaterial) -> CoefficientSet:
    """Global-axes coefficient set for either material kind."""
    if isinstance(mat, FluidMaterial):
        cs = fluid_coefficients(mat)
        return CoefficientSet(cs.A_sv, cs.A_vs, cs.B_sv, cs.B_vs, cs.D_v,
                              cs.E_s, cs.E_v, axes="global", kind="fluid")
    return rotate_to_global(poro_coefficients(mat), mat.theta)


# ---------------------------------------------------------------------------
# bundled media (SI units: Pa, kg/m^3, m^2, Pa*s)
# ---------------------------------------------------------------------------

BUILTIN: dict[str, PoroMaterial | FluidMaterial] = {
    # orthotropic reservoir sandstone
    "sandstone": PoroMaterial(
        K_s=80.0e9, rho_s=2500.0,
        c11=71.8e9, c12=3.2e9, c13=1.2e9, c33=53.4e9, c55=26.1e9,
        phi=0.2,
        kappa1=600.0e-15, kappa3=100.0e-15,   # 600 / 100 * 1e-15 m^2
        T1=2.0, T3=3.6,
        K_f=2.5e9, rho_f=1040.0, eta=1.0e-3,
    ),
    # isotropic shale
    "shale": PoroMaterial(
        K_s=7.6e9, rho_s=2210.0,
        c11=11.9e9, c12=3.96e9, c13=3.96e9, c33=11.9e9, c55=3.96e9,
        phi=0.16,
        kappa1=100.0e-15, kappa3=100.0e-15,
        T1=2.0, T3=2.0,
        K_f=2.5e9, rho_f=1040.0, eta=1.0e-3,
    ),
    # cortical (compact) bone, vascular pore space
    "cortical_bone": PoroMaterial(
        K_s=14.0e9, rho_s=1960.0,
        c11=20.6e9, c12=10.6e9, c13=10.6e9, c33=20.6e9, c55=5.0e9,
        phi=0.04,
        kappa1=630.0e-15, kappa3=630.0e-15,
        T1=2.0, T3=2.0,
        K_f=2.3e9, rho_f=1060.0, eta=1.0e-3,
    ),
    # cancellous (trabecular) bone with marrow
    "cancellous_bone": PoroMaterial(
        K_s=18.5e9, rho_s=1960.0,
        c11=5.2e9, c12=2.4e9, c13=2.4e9, c33=5.2e9, c55=1.38e9,
        phi=0.75,
        kappa1=7.0e-9, kappa3=7.0e-9,         # 7e6 * 1e-15 m^2
        T1=1.0, T3=1.0,
        K_f=2.2e9, rho_f=990.0, eta=40.0e-3,
    ),
    # saline pore water (matches the sandstone/shale pore fluid)
    "brine": FluidMaterial(K_f=2.5e9, rho_f=1040.0),
    # fresh water bath
    "water": FluidMaterial(K_f=2.25e9, rho_f=1000.0),
}
