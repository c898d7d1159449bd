"""Closed-form plane waves and flat-interface reflection/transmission.

Oracles used here, in rough order of independence: textbook impedance
formulas for fluid-fluid reflection, Snell's law for refraction angles,
the dispersion relation residual (which any claimed mode must satisfy),
time-averaged energy flux balance computed by quadrature, and the
interface condition matrices checked pointwise along the interface.
"""

import dataclasses
import math

import numpy as np
import pytest

from porowave.analytic import (
    AnalyticError,
    PlaneWaveSpec,
    evaluate,
    normal_energy_flux,
    plane_wave,
    reflect_transmit,
)
from porowave.materials import BUILTIN, global_coefficients
from porowave.riemann import edge_context, interface_matrices

SAND = BUILTIN["sandstone"]
SHALE = BUILTIN["shale"]
BRINE = BUILTIN["brine"]
WATER = BUILTIN["water"]

# inviscid twins: same skeleton, pore fluid viscosity switched off
ISAND = dataclasses.replace(SAND, eta=0.0)
ISHALE = dataclasses.replace(SHALE, eta=0.0)


def _enorm(mat, v):
    E = global_coefficients(mat).E8()
    return math.sqrt(float(np.real(np.conj(v) @ E @ v)))


def _dispersion_residual(mat, tangent, normal, k_t, k_n, omega, v):
    """Energy-norm residual of (-iw I + i(k_t Atan + k_n Bnorm) - D) v."""
    co = global_coefficients(mat)
    atan = co.directional(*tangent)
    bnorm = co.directional(*normal)
    op = (-1j * omega * np.eye(8) + 1j * (k_t * atan + k_n * bnorm)
          - co.D8().astype(complex))
    return _enorm(mat, op @ v) / (omega * _enorm(mat, v))


def _avg_flux(mat, normal, omega, v, samples=64):
    """Time-averaged normal energy flux by trapezoid rule, test-side route."""
    co = global_coefficients(mat)
    M = co.E8() @ co.directional(*normal)
    period = 2.0 * math.pi / omega
    ts = np.linspace(0.0, period, samples + 1)
    qs = np.real(np.exp(-1j * omega * ts)[:, None] * np.asarray(v)[None, :])
    f = np.einsum("ti,ij,tj->t", qs, M, qs)
    dt = period / samples
    return dt * (0.5 * f[0] + f[1:-1].sum() + 0.5 * f[-1]) / period


def _down(angle_deg):
    """Unit direction tilted angle_deg from straight down, toward +x."""
    a = math.radians(angle_deg)
    return (math.sin(a), -math.cos(a))


def _field_waves(field):
    waves = [(field.material_in, field.incident)]
    waves += [(field.material_in, w) for w in field.reflected]
    waves += [(field.material_out, w) for w in field.transmitted]
    return waves


# ---------------------------------------------------------------------------
# plane_wave
# ---------------------------------------------------------------------------


def test_spec_validation():
    with pytest.raises(AnalyticError):
        PlaneWaveSpec(omega=1.0, direction=(1.0, 1.0), family="acoustic",
                      material=WATER)
    with pytest.raises(AnalyticError):
        PlaneWaveSpec(omega=-2.0, direction=(1.0, 0.0), family="acoustic",
                      material=WATER)
    with pytest.raises(AnalyticError):
        PlaneWaveSpec(omega=1.0, direction=(1.0, 0.0), family="fast_P",
                      material=WATER)
    with pytest.raises(AnalyticError):
        PlaneWaveSpec(omega=1.0, direction=(1.0, 0.0), family="acoustic",
                      material=SAND)
    with pytest.raises(AnalyticError):
        PlaneWaveSpec(omega=1.0, direction=(1.0, 0.0), family="sideways_P",
                      material=SAND)


def test_brine_acoustic_wavenumber():
    """k must equal omega over the closed-form sound speed sqrt(K/rho)."""
    spec = PlaneWaveSpec(omega=1.0, direction=(1.0, 0.0), family="acoustic",
                         material=BRINE)
    k, v, period = plane_wave(spec)
    c = math.sqrt(2.5e9 / 1040.0)
    assert math.isclose(k.real, 1.0 / c, rel_tol=1e-12)
    assert k.imag == 0.0
    assert math.isclose(period, 2.0 * math.pi, rel_tol=1e-15)
    assert math.isclose(_enorm(BRINE, v), 1.0, rel_tol=1e-12)
    assert np.all(v[1:6] == 0.0)


def test_sandstone_fast_p_along_axis1():
    spec = PlaneWaveSpec(omega=1.0, direction=(1.0, 0.0), family="fast_P",
                         material=ISAND)
    k, v, _ = plane_wave(spec)
    assert abs(k.real - 1.0 / 6000.0) <= 0.01 / 6000.0
    assert k.imag == 0.0


@pytest.mark.parametrize("family", ["fast_P", "S", "slow_P"])
@pytest.mark.parametrize("direction", [(1.0, 0.0), (0.6, 0.8)])
def test_inviscid_poro_dispersion(family, direction):
    spec = PlaneWaveSpec(omega=500.0, direction=direction, family=family,
                         material=ISAND)
    k, v, _ = plane_wave(spec)
    t = (-direction[1], direction[0])
    assert k.imag == 0.0 and k.real > 0.0
    assert _dispersion_residual(ISAND, t, direction, 0.0, k, 500.0, v) < 1e-10
    assert math.isclose(_enorm(ISAND, v), 1.0, rel_tol=1e-12)


@pytest.mark.parametrize("direction", [(1.0, 0.0), (0.28, -0.96)])
def test_viscous_slow_p_damped(direction):
    omega = 2.0 * math.pi * 1.0e4
    spec = PlaneWaveSpec(omega=omega, direction=direction, family="slow_P",
                         material=SAND, viscous=True)
    k, v, _ = plane_wave(spec)
    t = (-direction[1], direction[0])
    assert k.imag > 0.0
    assert _dispersion_residual(SAND, t, direction, 0.0, k, omega, v) < 1e-10
    assert math.isclose(_enorm(SAND, v), 1.0, rel_tol=1e-10)


def test_viscous_family_ordering():
    """Wavenumbers must order fast P < shear < slow P at fixed frequency."""
    omega = 2.0 * math.pi * 1.0e4
    ks = {}
    for family in ("fast_P", "S", "slow_P"):
        spec = PlaneWaveSpec(omega=omega, direction=(0.6, 0.8), family=family,
                             material=SAND, viscous=True)
        ks[family], _, _ = plane_wave(spec)
    assert ks["fast_P"].real < ks["S"].real < ks["slow_P"].real
    for k in ks.values():
        assert k.imag >= 0.0


@pytest.mark.parametrize("family", ["fast_P", "S", "slow_P"])
def test_viscous_tiny_eta_matches_inviscid(family):
    """The damped eigensolve must reduce to the closed inviscid route."""
    thin = dataclasses.replace(SAND, eta=1e-12)
    omega = 2.0 * math.pi * 1.0e4
    kv, vv, _ = plane_wave(PlaneWaveSpec(omega=omega, direction=(0.6, 0.8),
                                         family=family, material=thin,
                                         viscous=True))
    ki, vi, _ = plane_wave(PlaneWaveSpec(omega=omega, direction=(0.6, 0.8),
                                         family=family, material=ISAND))
    assert abs(kv - ki) <= 1e-6 * abs(ki)
    E = global_coefficients(ISAND).E8()
    align = abs(complex(np.conj(vv) @ E @ vi.astype(complex)))
    assert math.isclose(align, 1.0, rel_tol=1e-6)


# ---------------------------------------------------------------------------
# reflect_transmit: classical oracles
# ---------------------------------------------------------------------------


def test_identical_fluids_passthrough():
    spec = PlaneWaveSpec(omega=200.0, direction=_down(35.0),
                         family="acoustic", material=WATER)
    field = reflect_transmit(WATER, WATER, spec)
    k_in, v_in, _ = plane_wave(spec)
    assert len(field.reflected) == 1 and len(field.transmitted) == 1
    assert abs(field.reflected[0].beta) <= 1e-12
    w = field.transmitted[0]
    assert np.allclose(w.beta * w.V, v_in, rtol=0.0, atol=1e-12 * np.abs(v_in).max())
    assert abs(w.k_normal - field.incident.k_normal) <= 1e-12 * abs(k_in)


def test_two_fluids_normal_incidence_impedance_formula():
    """Pressure reflection and transmission match (Z2-Z1)/(Z2+Z1), 2Z2/(Z1+Z2)."""
    z1 = 1000.0 * math.sqrt(2.25e9 / 1000.0)
    z2 = 1040.0 * math.sqrt(2.5e9 / 1040.0)
    r_exp = (z2 - z1) / (z2 + z1)
    t_exp = 2.0 * z2 / (z2 + z1)
    spec = PlaneWaveSpec(omega=300.0, direction=(0.0, -1.0),
                         family="acoustic", material=WATER)
    field = reflect_transmit(WATER, BRINE, spec)
    _, v_in, _ = plane_wave(spec)
    wr = field.reflected[0]
    wt = field.transmitted[0]
    r = complex(wr.beta * wr.V[0] / v_in[0])
    t = complex(wt.beta * wt.V[0] / v_in[0])
    assert math.isclose(r.real, r_exp, rel_tol=1e-10)
    assert abs(r.imag) <= 1e-12
    assert math.isclose(t.real, t_exp, rel_tol=1e-10)
    assert abs(t.imag) <= 1e-12


def test_oblique_fluid_fluid_snell():
    c1 = math.sqrt(2.25e9 / 1000.0)
    c2 = math.sqrt(2.5e9 / 1040.0)
    spec = PlaneWaveSpec(omega=700.0, direction=_down(30.0),
                         family="acoustic", material=WATER)
    field = reflect_transmit(WATER, BRINE, spec)
    # common tangential wavenumber: k sin(angle) on both sides
    k_in = 700.0 / c1
    assert math.isclose(field.k_t.real, k_in * 0.5, rel_tol=1e-12)
    wt = field.transmitted[0]
    sin_t = field.k_t.real / (700.0 / c2)
    assert math.isclose(sin_t, (c2 / c1) * 0.5, rel_tol=1e-12)
    # transmitted normal wavenumber closes the dispersion circle
    k_n_exp = math.sqrt((700.0 / c2) ** 2 - field.k_t.real**2)
    assert math.isclose(abs(wt.k_normal.real), k_n_exp, rel_tol=1e-10)
    # reflected wave leaves at the incidence angle, flipped normal component
    wr = field.reflected[0]
    assert math.isclose(wr.k_normal.real, -k_in * math.cos(math.radians(30.0)),
                        rel_tol=1e-10)
    # all-propagating decomposition balances energy flux through the interface
    f_in = _avg_flux(WATER, field.normal, 700.0, field.incident.beta * field.incident.V)
    f_r = _avg_flux(WATER, field.normal, 700.0, wr.beta * wr.V)
    f_t = _avg_flux(BRINE, field.normal, 700.0, wt.beta * wt.V)
    assert abs(f_in + f_r - f_t) <= 1e-10 * abs(f_in)


def test_total_internal_reflection_two_fluids():
    """Past the critical angle all average flux returns to the upper fluid."""
    omega = 2.0 * math.pi * 1000.0
    spec = PlaneWaveSpec(omega=omega, direction=_down(80.0),
                         family="acoustic", material=WATER)
    field = reflect_transmit(WATER, BRINE, spec)
    wt = field.transmitted[0]
    assert wt.k_normal.imag > 0.0
    f_in = _avg_flux(WATER, field.normal, omega, field.incident.V)
    f_r = _avg_flux(WATER, field.normal, omega,
                    field.reflected[0].beta * field.reflected[0].V)
    f_t = _avg_flux(BRINE, field.normal, omega, wt.beta * wt.V)
    assert abs(f_t) <= 1e-8 * abs(f_in)
    assert abs(f_in + f_r) <= 1e-8 * abs(f_in)
    assert math.isclose(abs(field.reflected[0].beta), 1.0, rel_tol=1e-8)


def test_brine_over_sandstone_45deg_flux_balance():
    """Open-pore contact at 45 degrees: fast P and shear go evanescent."""
    omega = 2.0 * math.pi * 2000.0
    spec = PlaneWaveSpec(omega=omega, direction=_down(45.0),
                         family="acoustic", material=BRINE)
    field = reflect_transmit(BRINE, ISAND, spec, eta_d=1.0)
    assert len(field.reflected) == 1 and len(field.transmitted) == 3
    evanescent = [w for w in field.transmitted if w.k_normal.imag > 1e-8 * abs(w.k_normal)]
    assert len(evanescent) == 2
    for w in evanescent:
        assert w.k_normal.imag > 0.0
    f_in = _avg_flux(BRINE, field.normal, omega, field.incident.V)
    f_r = sum(_avg_flux(BRINE, field.normal, omega, w.beta * w.V)
              for w in field.reflected)
    f_t = sum(_avg_flux(ISAND, field.normal, omega, w.beta * w.V)
              for w in field.transmitted)
    assert abs(f_in + f_r - f_t) <= 1e-8 * abs(f_in)
    # evanescent members carry no average flux on their own
    for w in evanescent:
        assert abs(_avg_flux(ISAND, field.normal, omega, w.beta * w.V)) \
            <= 1e-8 * abs(f_in)


def test_water_over_sandstone_subcritical_balance():
    """At 5 degrees every transmitted branch propagates and carries flux."""
    omega = 2.0 * math.pi * 500.0
    spec = PlaneWaveSpec(omega=omega, direction=_down(5.0),
                         family="acoustic", material=WATER)
    field = reflect_transmit(WATER, ISAND, spec, eta_d=1.0)
    assert len(field.transmitted) == 3
    fluxes = []
    for w in field.transmitted:
        assert abs(w.k_normal.imag) <= 1e-8 * abs(w.k_normal)
        fluxes.append(_avg_flux(ISAND, field.normal, omega, w.beta * w.V))
    f_in = _avg_flux(WATER, field.normal, omega, field.incident.V)
    f_r = _avg_flux(WATER, field.normal, omega,
                    field.reflected[0].beta * field.reflected[0].V)
    assert all(f > 0.0 for f in fluxes)
    assert abs(f_in + f_r - sum(fluxes)) <= 1e-8 * abs(f_in)


# ---------------------------------------------------------------------------
# reflect_transmit: invariants across interface kinds
# ---------------------------------------------------------------------------


CASES = [
    pytest.param(WATER, BRINE,
                 PlaneWaveSpec(omega=700.0, direction=_down(30.0),
                               family="acoustic", material=WATER),
                 1.0, 0.5, id="fluid-fluid"),
    pytest.param(BRINE, ISAND,
                 PlaneWaveSpec(omega=2.0 * math.pi * 2000.0,
                               direction=_down(45.0), family="acoustic",
                               material=BRINE),
                 1.0, 0.5, id="fluid-poro-open"),
    pytest.param(BRINE, SAND,
                 PlaneWaveSpec(omega=2.0 * math.pi * 900.0,
                               direction=_down(20.0), family="acoustic",
                               material=BRINE),
                 0.5, 0.5, id="fluid-poro-imperfect-viscous"),
    pytest.param(ISAND, ISHALE,
                 PlaneWaveSpec(omega=2.0 * math.pi * 1500.0,
                               direction=_down(25.0), family="fast_P",
                               material=ISAND),
                 1.0, 0.5, id="poro-poro-open"),
    pytest.param(SAND, SHALE,
                 PlaneWaveSpec(omega=2.0 * math.pi * 800.0,
                               direction=_down(10.0), family="fast_P",
                               material=SAND, viscous=True),
                 0.3, 0.25, id="poro-poro-imperfect-viscous"),
    pytest.param(WATER, ISAND,
                 PlaneWaveSpec(omega=2.0 * math.pi * 400.0,
                               direction=(math.sin(math.radians(15.0)),
                                          math.cos(math.radians(15.0))),
                               family="fast_P", material=ISAND),
                 1.0, 0.5, id="poro-fluid-upgoing"),
]


@pytest.mark.parametrize("upper,lower,spec,eta_d,zeta", CASES)
def test_field_invariants(upper, lower, spec, eta_d, zeta):
    field = reflect_transmit(upper, lower, spec, eta_d=eta_d, zeta=zeta)
    omega = spec.omega
    t_vec, n_vec = field.tangent, field.normal

    # every stored mode satisfies its medium's dispersion relation and
    # shares the incident tangential wavenumber
    def check(mat, wave):
        assert math.isclose(_enorm(mat, wave.V), 1.0, rel_tol=1e-10)
        kt = wave.kvec[0] * t_vec[0] + wave.kvec[1] * t_vec[1]
        assert abs(kt - field.k_t) <= 1e-10 * max(abs(field.k_t), 1e-300)
        res = _dispersion_residual(mat, t_vec, n_vec, field.k_t,
                                   wave.k_normal, omega, wave.V)
        assert res < 1e-10

    for mat, wave in _field_waves(field):
        check(mat, wave)

    # interface condition residual along 100 stations of the contact line
    ctx = edge_context(field.material_in, field.material_out, n_vec,
                       eta_d=eta_d, zeta=zeta)
    C_in, C_out = interface_matrices(ctx)
    nrows = C_in.shape[0]
    assert len(field.reflected) + len(field.transmitted) == nrows

    xs = np.linspace(-4.0, 4.0, 100)
    phase_in = np.exp(1j * field.incident.kvec[0] * xs)
    q_in = phase_in[:, None] * field.incident.V[None, :]
    lhs = q_in.copy()
    for w in field.reflected:
        lhs += (w.beta * np.exp(1j * w.kvec[0] * xs))[:, None] * w.V[None, :]
    rhs = np.zeros_like(lhs)
    for w in field.transmitted:
        rhs += (w.beta * np.exp(1j * w.kvec[0] * xs))[:, None] * w.V[None, :]
    resid = lhs @ C_in.T - rhs @ C_out.T
    scale = np.linalg.norm(q_in @ C_in.T, axis=1).max()
    assert np.abs(resid).max() <= 1e-9 * scale


def test_reflect_transmit_errors():
    grazing = PlaneWaveSpec(omega=1.0, direction=(1.0, 0.0),
                            family="acoustic", material=WATER)
    with pytest.raises(AnalyticError):
        reflect_transmit(WATER, BRINE, grazing)
    mismatched = PlaneWaveSpec(omega=1.0, direction=(0.0, -1.0),
                               family="acoustic", material=BRINE)
    with pytest.raises(AnalyticError):
        reflect_transmit(WATER, ISAND, mismatched)


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def _sample_field():
    omega = 2.0 * math.pi * 2000.0
    spec = PlaneWaveSpec(omega=omega, direction=_down(45.0),
                         family="acoustic", material=BRINE)
    return reflect_transmit(BRINE, ISAND, spec, eta_d=1.0), omega


def test_evaluate_period_shift():
    field, omega = _sample_field()
    xs = np.linspace(-0.4, 0.4, 7)
    zs = np.linspace(-0.3, 0.3, 7)
    X, Z = np.meshgrid(xs, zs, indexing="ij")
    a = evaluate(field, X, Z, 0.137)
    b = evaluate(field, X, Z, 0.137 + 2.0 * math.pi / omega)
    assert np.abs(a - b).max() <= 1e-12 * max(np.abs(a).max(), 1.0)


def test_evaluate_sides_match_manual_sums():
    field, omega = _sample_field()
    t = 3.7e-4

    def manual(x, z, waves):
        acc = np.zeros(8, complex)
        for w in waves:
            ph = np.exp(1j * (w.kvec[0] * x + w.kvec[1] * z - omega * t))
            acc += w.beta * ph * w.V
        return acc.real

    up = manual(0.21, 0.34, (field.incident, *field.reflected))
    down = manual(0.21, -0.11, field.transmitted)
    got_up = evaluate(field, 0.21, 0.34, t)
    got_down = evaluate(field, 0.21, -0.11, t)
    assert got_up.shape == (8,) and got_down.shape == (8,)
    np.testing.assert_allclose(got_up, up, rtol=0.0,
                               atol=1e-12 * np.abs(up).max())
    np.testing.assert_allclose(got_down, down, rtol=0.0,
                               atol=1e-12 * np.abs(down).max())
    # vectorized call agrees with the scalar one, point by point
    X = np.array([[0.21, 0.21], [-0.5, 0.8]])
    Z = np.array([[0.34, -0.11], [0.0, -2.0]])
    grid = evaluate(field, X, Z, t)
    assert grid.shape == (2, 2, 8)
    np.testing.assert_allclose(grid[0, 0], up, rtol=0.0,
                               atol=1e-12 * np.abs(up).max())


def test_evaluate_evanescent_far_field_is_quiet():
    field, omega = _sample_field()
    prop = [w for w in field.transmitted
            if abs(w.k_normal.imag) <= 1e-8 * abs(w.k_normal)]
    assert len(prop) == 1

    def slow_only(x, z, t):
        w = prop[0]
        ph = np.exp(1j * (w.kvec[0] * x + w.kvec[1] * z - omega * t))
        return (w.beta * ph * w.V).real

    with np.errstate(over="raise", invalid="raise"):
        got = evaluate(field, 0.33, -1.0e4, 1.1e-4)
    assert np.all(np.isfinite(got))
    # both evanescent members have decayed past double-precision range
    np.testing.assert_allclose(got, slow_only(0.33, -1.0e4, 1.1e-4),
                               rtol=0.0, atol=1e-290)


# ---------------------------------------------------------------------------
# flux helper
# ---------------------------------------------------------------------------


def test_normal_energy_flux_matches_quadratic_form():
    """Quadrature route equals the closed form Re(V^H E Bn V)/2."""
    omega = 2.0 * math.pi * 2000.0
    spec = PlaneWaveSpec(omega=omega, direction=_down(45.0),
                         family="acoustic", material=BRINE)
    field = reflect_transmit(BRINE, ISAND, spec, eta_d=1.0)
    co = global_coefficients(ISAND)
    M = co.E8() @ co.directional(*field.normal)
    for w in field.transmitted:
        v = w.beta * w.V
        closed = 0.5 * float(np.real(np.conj(v) @ M @ v))
        got = normal_energy_flux(v, ISAND, field.normal, omega)
        assert math.isclose(got, closed, rel_tol=1e-12, abs_tol=1e-12)
        byhand = _avg_flux(ISAND, field.normal, omega, v)
        assert math.isclose(got, byhand, rel_tol=1e-12, abs_tol=1e-12)
