"""Scenario configs and the command-line front end.

A scenario lives in one INI file.  Values carry SI unit suffixes ("2.5 GPa",
"22.5 deg", "40 mPa.s"); durations are either seconds ("18 us") or multiples
of the incident wave period ("1.25 periods").  Five kinds are understood:

``plane_wave``
    One wave crossing a homogeneous block, mainly for convergence runs.
``interface_rt``
    A flat horizontal interface at z = 0, upper medium incident from above.
``scatterer``
    A cylinder embedded in a fluid bath on the circle-fitted square grid.
``femur``
    Annular shell (marrow core, cortical shell, water bath) hit by a
    right-moving Gaussian pressure pulse.
``zeta_sweep``
    No simulation; tabulates interface solve conditioning over the
    row-splitting parameter.

Unless a side length is given, wave scenarios size the square domain to two
wavelengths of the incident family along the first principal axis.  Incident
waves are rescaled so their peak instantaneous energy density is one.

The femur pulse profile is exp(-(x - x0)^2 / (2 sigma_x^2)) with
sigma_x = c_bath / (2 pi f_sigma); f_sigma comes from the ``sigma_frequency``
key, the peak pressure and standoff from ``peak`` and ``standoff``.

Subcommands: ``run`` (snapshots plus final state and energy density),
``convergence`` (grid ladder against the analytic field, or pairwise
self-comparison for the scatterer), ``zeta-sweep``, ``rt-coefficients``
(analytic reflection and transmission table), ``dump-grid``.  All output is
deterministic: rerunning a command writes byte-identical files.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import (
    AnalyticError,
    PlaneWaveSpec,
    evaluate,
    normal_energy_flux,
    plane_wave,
    reflect_transmit,
)
from .fieldio import FieldIOError, dump_energy, dump_field, write_array
from .grid import (
    GridBuildError,
    MaterialRegion,
    build_grid,
    femur_annulus_mapping,
    identity_mapping,
    square_to_circle_mapping,
)
from .materials import (
    BUILTIN,
    FluidMaterial,
    PoroMaterial,
    derive_scalars,
    global_coefficients,
)
from .riemann import edge_context, interface_condition_number
from .solver import SolverConfigError, StepConfig, advance, initialize_state
from .verify import (
    ConvergenceResult,
    VerifyError,
    fit_rate,
    grid_error,
    write_convergence_csv,
)


class HarnessError(ValueError):
    """A config file or command invocation that cannot be acted on."""


_MISSING = object()

# multiply the magnitude by this to land in base SI units
_UNITS = {
    "": 1.0,
    "Pa": 1.0, "kPa": 1.0e3, "MPa": 1.0e6, "GPa": 1.0e9,
    "Hz": 1.0, "kHz": 1.0e3, "MHz": 1.0e6,
    "rad/s": 1.0,
    "m": 1.0, "km": 1.0e3, "cm": 1.0e-2, "mm": 1.0e-3,
    "um": 1.0e-6, "µm": 1.0e-6,
    "s": 1.0, "ms": 1.0e-3, "us": 1.0e-6, "µs": 1.0e-6, "ns": 1.0e-9,
    "deg": math.pi / 180.0, "rad": 1.0,
    "m^2": 1.0, "m2": 1.0,
    "Pa.s": 1.0, "mPa.s": 1.0e-3,
    "kg/m^3": 1.0, "kg/m3": 1.0,
    "m/s": 1.0, "km/s": 1.0e3,
}

_FAMILIES = ("acoustic", "fast_P", "slow_P", "S")

_LIMITERS = ("none", "monotonized_centered")
_SECOND_ORDER = ("everywhere", "omit_at_material_interfaces", "omit_on_line",
                 "off")
_BOUNDARIES = ("analytic_fill", "extrapolate_zero_order")

# material roles each scenario kind must name in [materials]
_KIND_ROLES = {
    "plane_wave": ("medium",),
    "interface_rt": ("upper", "lower"),
    "scatterer": ("bath", "cylinder"),
    "femur": ("bath", "shell", "core"),
    "zeta_sweep": ("upper", "lower"),
}

_WAVE_KINDS = ("plane_wave", "interface_rt", "scatterer")

_SECTION_KEYS = {
    "scenario": {"kind", "title"},
    "wave": {"family", "angle", "angles", "omega", "frequency", "viscous"},
    "interface": {"eta_d", "zeta"},
    "grid": {"n", "n1", "n2", "grids", "side", "radius", "half_width",
             "blend_radius", "r_core", "r_outer"},
    "run": {"duration", "cfl", "limiter", "second_order", "boundary",
            "snapshot_interval"},
    "pulse": {"peak", "sigma_frequency", "standoff", "carrier"},
    "sweep": {"eta_d", "zeta_points"},
    "output": {"directory", "prefix"},
}


def parse_quantity(text: str) -> float:
    """Number with an optional SI unit suffix, e.g. '2.5 GPa' -> 2.5e9."""
    parts = str(text).split()
    if len(parts) not in (1, 2):
        raise HarnessError(f"cannot read quantity {text!r}")
    try:
        value = float(parts[0])
    except ValueError:
        raise HarnessError(f"cannot read number in {text!r}") from None
    unit = parts[1] if len(parts) == 2 else ""
    if unit not in _UNITS:
        known = ", ".join(sorted(u for u in _UNITS if u))
        raise HarnessError(f"unknown unit {unit!r}; known units: {known}")
    return value * _UNITS[unit]


def parse_duration(text: str) -> tuple[float, str]:
    """Span as (value, 'periods') or (seconds, 'seconds')."""
    parts = str(text).split()
    if len(parts) == 2 and parts[1] in ("periods", "period"):
        try:
            return float(parts[0]), "periods"
        except ValueError:
            raise HarnessError(f"cannot read number in {text!r}") from None
    if len(parts) == 2 and parts[1] in ("s", "ms", "us", "µs", "ns"):
        return parse_quantity(text), "seconds"
    raise HarnessError(
        f"duration {text!r} needs a unit: seconds (s, ms, us, ns) or periods")


class _Reader:
    """Parsed INI text plus a (section, key) -> line number table."""

    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source
        parser = configparser.ConfigParser(interpolation=None,
                                           inline_comment_prefixes=(";", "#"))
        try:
            parser.read_string(text, source)
        except configparser.MissingSectionHeaderError as exc:
            raise HarnessError(
                f"{source}:{exc.lineno}: line appears before any [section] "
                f"header") from exc
        except configparser.ParsingError as exc:
            lineno, line = exc.errors[0]
            raise HarnessError(
                f"{source}:{lineno}: cannot parse {line}") from exc
        except configparser.Error as exc:
            raise HarnessError(f"{source}: {exc}") from exc
        self.parser = parser
        self._lines: dict = {}
        section = None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1].strip().lower()
                self._lines.setdefault(section, lineno)
            elif section and "=" in line and not line.startswith((";", "#")):
                key = line.split("=", 1)[0].strip().lower()
                self._lines.setdefault((section, key), lineno)

    def where(self, section: str, key: str | None = None) -> str:
        loc = None
        if key is not None:
            loc = self._lines.get((section.lower(), key.lower()))
        if loc is None:
            loc = self._lines.get(section.lower())
        return f"{self.source}:{loc}" if loc else self.source

    def fail(self, section: str, key: str | None, msg: str):
        ctx = f"[{section}] {key}" if key else f"[{section}]"
        raise HarnessError(f"{self.where(section, key)}: {ctx}: {msg}")

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def raw(self, section: str, key: str, default=None):
        if self.has(section, key):
            return self.parser.get(section, key).strip()
        return default

    def quantity(self, section, key, default=_MISSING, minimum=None,
                 maximum=None) -> float:
        if not self.has(section, key):
            if default is _MISSING:
                self.fail(section, key, "value is required")
            return default
        try:
            value = parse_quantity(self.parser.get(section, key))
        except HarnessError as exc:
            self.fail(section, key, str(exc))
        if minimum is not None and value < minimum:
            self.fail(section, key, f"{value!r} is below {minimum!r}")
        if maximum is not None and value > maximum:
            self.fail(section, key, f"{value!r} is above {maximum!r}")
        return value

    def integer(self, section, key, default=_MISSING, minimum=None) -> int:
        if not self.has(section, key):
            if default is _MISSING:
                self.fail(section, key, "value is required")
            return default
        text = self.parser.get(section, key).strip()
        try:
            value = int(text)
        except ValueError:
            self.fail(section, key, f"cannot read integer {text!r}")
        if minimum is not None and value < minimum:
            self.fail(section, key, f"{value} is below {minimum}")
        return value

    def boolean(self, section, key, default=_MISSING) -> bool:
        if not self.has(section, key):
            if default is _MISSING:
                self.fail(section, key, "value is required")
            return default
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            got = self.parser.get(section, key)
            self.fail(section, key, f"cannot read boolean {got!r}")

    def choice(self, section, key, choices, default=_MISSING) -> str:
        if not self.has(section, key):
            if default is _MISSING:
                self.fail(section, key, "value is required")
            return default
        value = self.parser.get(section, key).strip()
        if value not in choices:
            self.fail(section, key,
                      f"unknown value {value!r}; choose one of "
                      f"{', '.join(choices)}")
        return value

    def int_list(self, section, key, default=()) -> tuple[int, ...]:
        raw = self.raw(section, key)
        if raw is None:
            return tuple(default)
        try:
            return tuple(int(p.strip()) for p in raw.split(",") if p.strip())
        except ValueError:
            self.fail(section, key, f"cannot read integer list {raw!r}")

    def quantity_list(self, section, key, default=()) -> tuple[float, ...]:
        raw = self.raw(section, key)
        if raw is None:
            return tuple(default)
        try:
            return tuple(parse_quantity(p.strip())
                         for p in raw.split(",") if p.strip())
        except HarnessError as exc:
            self.fail(section, key, str(exc))

    def duration(self, section, key, default=_MISSING):
        if not self.has(section, key):
            if default is _MISSING:
                self.fail(section, key, "value is required")
            return default
        try:
            return parse_duration(self.parser.get(section, key))
        except HarnessError as exc:
            self.fail(section, key, str(exc))


@dataclasses.dataclass(frozen=True)
class ScenarioConfig:
    """One fully validated scenario file."""

    kind: str
    title: str
    source: str
    text: str
    materials: dict
    material_names: dict
    omega: float | None
    family: str | None
    angle: float
    angles: tuple[float, ...]
    viscous: bool
    eta_d: float
    zeta: float
    n1: int | None
    n2: int | None
    grids: tuple[int, ...]
    geometry: dict
    duration: tuple[float, str] | None
    cfl: float
    limiter: str
    second_order: str
    boundary: str | None
    snapshot_interval: tuple[float, str] | None
    pulse: dict
    sweep: dict
    out_dir: str
    prefix: str


@dataclasses.dataclass(frozen=True)
class RunSetup:
    """A scenario turned into concrete solver inputs."""

    grid: object
    step: StepConfig
    field: object
    omega: float | None
    t_end: float
    snapshot_seconds: float | None


def _parse_material_section(r: _Reader, sect: str):
    keys = set(r.parser[sect])

    def q(key, default=_MISSING):
        return r.quantity(sect, key, default=default)

    if "k_s" in keys:
        allowed = {"k_s", "rho_s", "c11", "c12", "c13", "c33", "c55", "phi",
                   "kappa", "kappa1", "kappa3", "t", "t1", "t3", "k_f",
                   "rho_f", "eta"}
        for k in sorted(keys - allowed):
            r.fail(sect, k, "unknown porous-material field")
        c11 = q("c11")
        c12 = q("c12")
        kap = q("kappa", None)
        tort = q("t", None)
        kwargs = dict(K_s=q("k_s"), rho_s=q("rho_s"), c11=c11, c12=c12,
                      c13=q("c13", c12), c33=q("c33", c11), c55=q("c55"),
                      phi=q("phi"), kappa1=q("kappa1", kap),
                      kappa3=q("kappa3", kap), T1=q("t1", tort),
                      T3=q("t3", tort), K_f=q("k_f"), rho_f=q("rho_f"),
                      eta=q("eta", 0.0))
        for name, value in kwargs.items():
            if value is None:
                r.fail(sect, name.lower(), "value is required")
        try:
            return PoroMaterial(**kwargs)
        except ValueError as exc:
            r.fail(sect, None, str(exc))
    allowed = {"k_f", "rho_f"}
    for k in sorted(keys - allowed):
        r.fail(sect, k, "unknown fluid field")
    try:
        return FluidMaterial(K_f=q("k_f"), rho_f=q("rho_f"))
    except ValueError as exc:
        r.fail(sect, None, str(exc))


def _resolve_material(r: _Reader, role: str, name: str):
    if name in BUILTIN:
        return BUILTIN[name]
    sect = f"material.{name}"
    if r.parser.has_section(sect):
        return _parse_material_section(r, sect)
    known = ", ".join(sorted(BUILTIN))
    r.fail("materials", role,
           f"unknown material {name!r}: not one of {known} and no "
           f"[{sect}] section present")


def _check_sections(r: _Reader, kind: str):
    roles = _KIND_ROLES[kind]
    material_keys = set(roles) | {f"{role}_angle" for role in roles}
    for sect in r.parser.sections():
        if sect.startswith("material."):
            continue
        low = sect.lower()
        if low == "materials":
            for key in r.parser[sect]:
                if key not in material_keys:
                    r.fail(sect, key,
                           f"unknown key; kind {kind!r} names materials "
                           f"{', '.join(roles)}")
            continue
        if low not in _SECTION_KEYS:
            r.fail(sect, None, "unknown section")
        for key in r.parser[sect]:
            if key not in _SECTION_KEYS[low]:
                r.fail(sect, key, "unknown key")


def load_config_text(text: str, source: str = "<config>") -> ScenarioConfig:
    """Validate one INI document into a ScenarioConfig."""
    r = _Reader(text, source)
    if not r.parser.has_section("scenario"):
        raise HarnessError(f"{source}: missing [scenario] section")
    kind = r.raw("scenario", "kind")
    if kind is None:
        r.fail("scenario", "kind", "value is required")
    kind = kind.strip()
    if kind not in _KIND_ROLES:
        r.fail("scenario", "kind",
               f"unknown kind {kind!r}; choose one of "
               f"{', '.join(sorted(_KIND_ROLES))}")
    _check_sections(r, kind)
    title = r.raw("scenario", "title", "")

    wants_wave = kind in _WAVE_KINDS
    viscous = r.boolean("wave", "viscous", False) if wants_wave else False

    materials = {}
    names = {}
    for role in _KIND_ROLES[kind]:
        name = r.raw("materials", role)
        if name is None:
            r.fail("materials", role, f"kind {kind!r} needs this material")
        mat = _resolve_material(r, role, name)
        angle_key = f"{role}_angle"
        if r.has("materials", angle_key):
            theta = r.quantity("materials", angle_key)
            if not isinstance(mat, PoroMaterial):
                r.fail("materials", angle_key,
                       f"{name!r} is a fluid; only porous materials rotate")
            mat = dataclasses.replace(mat, theta=theta)
        if isinstance(mat, PoroMaterial) and wants_wave and not viscous:
            mat = dataclasses.replace(mat, eta=0.0)
        if isinstance(mat, PoroMaterial) and kind == "femur":
            # the pulse study is inviscid throughout
            mat = dataclasses.replace(mat, eta=0.0)
        materials[role] = mat
        names[role] = name

    family = None
    omega = None
    angle = 0.0
    angles: tuple[float, ...] = ()
    if wants_wave:
        family = r.choice("wave", "family", _FAMILIES)
        has_omega = r.has("wave", "omega")
        has_freq = r.has("wave", "frequency")
        if has_omega and has_freq:
            r.fail("wave", "frequency",
                   "give either omega or frequency, not both")
        if not has_omega and not has_freq:
            r.fail("wave", "omega", "omega or frequency is required")
        if has_omega:
            omega = r.quantity("wave", "omega")
        else:
            omega = 2.0 * math.pi * r.quantity("wave", "frequency")
        if not omega > 0.0:
            r.fail("wave", "omega" if has_omega else "frequency",
                   "must be positive")
        angle = r.quantity("wave", "angle", 0.0)
        angles = r.quantity_list("wave", "angles")
        if kind == "interface_rt" and not 0.0 <= angle < math.pi / 2.0:
            r.fail("wave", "angle",
                   "incidence must lie in [0, 90) degrees from vertical")
        if kind == "scatterer" and family != "acoustic":
            r.fail("wave", "family", "the bath carries acoustic waves only")

    eta_d = r.quantity("interface", "eta_d", 1.0, minimum=0.0, maximum=1.0)
    zeta = r.quantity("interface", "zeta", 0.5, minimum=0.0, maximum=1.0)

    n1 = n2 = None
    grids: tuple[int, ...] = ()
    geometry: dict = {}
    duration = None
    snapshot = None
    cfl = 0.9
    limiter = "none"
    second_order = "everywhere"
    boundary = None
    if kind != "zeta_sweep":
        if r.has("grid", "n") and (r.has("grid", "n1") or r.has("grid", "n2")):
            r.fail("grid", "n", "give n or n1/n2, not both")
        if r.has("grid", "n"):
            n1 = n2 = r.integer("grid", "n", minimum=4)
        else:
            n1 = r.integer("grid", "n1", minimum=4)
            n2 = r.integer("grid", "n2", n1, minimum=4)
        grids = r.int_list("grid", "grids")
        for g in grids:
            if g < 4:
                r.fail("grid", "grids", f"grid size {g} is below 4")
        if any(b <= a for a, b in zip(grids, grids[1:])):
            r.fail("grid", "grids", "grid sizes must increase")

        if kind in ("plane_wave", "interface_rt"):
            geometry["side"] = r.quantity("grid", "side", None, minimum=0.0)
        elif kind == "scatterer":
            geometry["radius"] = r.quantity("grid", "radius", 0.025,
                                            minimum=0.0)
            geometry["half_width"] = r.quantity("grid", "half_width", 0.10,
                                                minimum=0.0)
            geometry["blend_radius"] = r.quantity("grid", "blend_radius",
                                                  None)
        elif kind == "femur":
            geometry["r_core"] = r.quantity("grid", "r_core", 0.007,
                                            minimum=0.0)
            geometry["r_outer"] = r.quantity("grid", "r_outer", 0.012,
                                             minimum=0.0)
            geometry["half_width"] = r.quantity("grid", "half_width", 0.04,
                                                minimum=0.0)
            geometry["blend_radius"] = r.quantity("grid", "blend_radius",
                                                  None)

        duration = r.duration("run", "duration")
        snapshot = r.duration("run", "snapshot_interval", None)
        cfl = r.quantity("run", "cfl", 0.9, minimum=1e-6, maximum=1.0)
        # mapped-grid scenarios default to the limiter: the unlimited
        # correction terms feed a growing pressure checkerboard where the
        # edge normals rotate cell to cell, while rectilinear grids hold
        # clean second order without one
        default_limiter = ("monotonized_centered" if kind in ("femur",
                           "scatterer") else "none")
        limiter = r.choice("run", "limiter", _LIMITERS, default_limiter)
        second_order = r.choice("run", "second_order", _SECOND_ORDER,
                                "everywhere")
        boundary = r.choice("run", "boundary", _BOUNDARIES, None)

    pulse: dict = {}
    if kind == "femur":
        pulse["peak"] = r.quantity("pulse", "peak", 1.0)
        pulse["sigma_frequency"] = r.quantity("pulse", "sigma_frequency",
                                              1.0e5, minimum=1e-9)
        pulse["standoff"] = r.quantity("pulse", "standoff", 0.015)
        pulse["carrier"] = r.quantity("pulse", "carrier", 0.0, minimum=0.0)

    sweep = {
        "eta_d": r.quantity_list("sweep", "eta_d", (0.0, 0.5, 1.0)),
        "zeta_points": r.integer("sweep", "zeta_points", 41, minimum=2),
    }
    for e in sweep["eta_d"]:
        if not 0.0 <= e <= 1.0:
            r.fail("sweep", "eta_d", f"{e!r} is outside [0, 1]")

    out_dir = r.raw("output", "directory", "out")
    prefix = r.raw("output", "prefix", kind)

    return ScenarioConfig(
        kind=kind, title=title, source=source, text=text,
        materials=materials, material_names=names, omega=omega,
        family=family, angle=angle, angles=angles, viscous=viscous,
        eta_d=eta_d, zeta=zeta, n1=n1, n2=n2, grids=grids,
        geometry=geometry, duration=duration, cfl=cfl, limiter=limiter,
        second_order=second_order, boundary=boundary,
        snapshot_interval=snapshot, pulse=pulse, sweep=sweep,
        out_dir=out_dir, prefix=prefix)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise HarnessError(f"cannot read config {path}: {exc}") from exc
    return load_config_text(text, source=str(path))


# ---------------------------------------------------------------------------
# scenario assembly
# ---------------------------------------------------------------------------


def _unit_peak_scale(V: np.ndarray, material) -> float:
    """Amplitude making max_t of the instantaneous energy density equal 1.

    For q(t) = Re(V e^{-i w t}) the density (1/2) q^T E q oscillates between
    (1/4)(V* E V - |V^T E V|) and (1/4)(V* E V + |V^T E V|).
    """
    E = global_coefficients(material).E8()
    herm = float(np.real(np.conj(V) @ (E @ V)))
    sym = abs(complex(V @ (E @ V)))
    return 1.0 / math.sqrt(0.25 * (herm + sym))


def _principal_speed(material, family: str) -> float:
    if isinstance(material, FluidMaterial):
        return material.sound_speed
    d = derive_scalars(material)
    return {"fast_P": d.c_pf1, "S": d.c_s1, "slow_P": d.c_ps1}[family]


def _everywhere(x, z):
    return np.ones(np.broadcast(np.asarray(x), np.asarray(z)).shape,
                   dtype=bool)


def _to_seconds(span, omega, what: str) -> float:
    value, unit = span
    if unit == "seconds":
        return value
    if omega is None:
        raise HarnessError(
            f"{what} is given in periods but this scenario has no wave "
            f"period; give seconds instead")
    return value * 2.0 * math.pi / omega


def _plane_field(material, family, omega, direction, viscous):
    spec = PlaneWaveSpec(omega=omega, direction=direction, family=family,
                         material=material, viscous=viscous)
    k, V, _period = plane_wave(spec)
    amp = _unit_peak_scale(V, material)
    dx, dz = direction

    def field(x, z, t):
        x = np.asarray(x, float)
        z = np.asarray(z, float)
        phase = np.asarray(k * (dx * x + dz * z), complex) - 1j * 0.0
        phase = phase - omega * np.asarray(t, float) * (1.0 + 0.0j)
        wave = np.exp(1j * phase)[..., None] * V
        return amp * np.real(wave)

    return field


def _interface_field(cfg: ScenarioConfig):
    upper = cfg.materials["upper"]
    lower = cfg.materials["lower"]
    direction = (math.sin(cfg.angle), -math.cos(cfg.angle))
    spec = PlaneWaveSpec(omega=cfg.omega, direction=direction,
                         family=cfg.family, material=upper,
                         viscous=cfg.viscous)
    af = reflect_transmit(upper, lower, spec, eta_d=cfg.eta_d, zeta=cfg.zeta)
    amp = _unit_peak_scale(af.incident.V, upper)

    def field(x, z, t):
        return amp * evaluate(af, x, z, t)

    return field


def _embedded_cylinder_field(bath: FluidMaterial, omega: float,
                             radius: float):
    """Incident +x acoustic wave, continued into the cylinder.

    Inside, the same pressure trace appears as isotropic total stress with
    the solid frame moving bodily at the fluid particle velocity and no
    relative flow; at an open interface that continuation matches pressure,
    traction, and normal flux exactly, so the startup transient is small.
    """
    spec = PlaneWaveSpec(omega=omega, direction=(1.0, 0.0),
                         family="acoustic", material=bath)
    k, V, _period = plane_wave(spec)
    amp = _unit_peak_scale(V, bath)
    p_amp = amp * float(np.real(V[0]))
    u_amp = amp * float(np.real(V[6]))
    k_re = float(np.real(k))

    def field(x, z, t):
        xb, zb, tb = np.broadcast_arrays(np.asarray(x, float),
                                         np.asarray(z, float),
                                         np.asarray(t, float))
        ph = np.cos(k_re * xb - omega * tb)
        inside = np.hypot(xb, zb) <= radius
        p = p_amp * ph
        u = u_amp * ph
        out = np.zeros(ph.shape + (8,))
        out[..., 0] = p
        out[..., 1] = np.where(inside, -p, 0.0)
        out[..., 2] = np.where(inside, -p, 0.0)
        out[..., 4] = np.where(inside, u, 0.0)
        out[..., 6] = np.where(inside, 0.0, u)
        return out

    return field


def _pressure_pulse_field(bath: FluidMaterial, peak: float, sigma_x: float,
                          x_peak: float, carrier_k: float):
    c = bath.sound_speed
    impedance = bath.rho_f * c

    def field(x, z, t):
        xb, zb, tb = np.broadcast_arrays(np.asarray(x, float),
                                         np.asarray(z, float),
                                         np.asarray(t, float))
        arg = xb - x_peak - c * tb
        prof = peak * np.exp(-0.5 * (arg / sigma_x) ** 2)
        if carrier_k:
            prof = prof * np.cos(carrier_k * arg)
        out = np.zeros(prof.shape + (8,))
        out[..., 0] = prof
        out[..., 6] = prof / impedance
        return out

    return field


def assemble(config: ScenarioConfig, n: int | None = None) -> RunSetup:
    """Build the grid, step settings, and field for one scenario."""
    kind = config.kind
    if kind == "zeta_sweep":
        raise HarnessError("a zeta_sweep has nothing to simulate")
    n1 = int(n) if n is not None else config.n1
    n2 = int(n) if n is not None else config.n2
    geo = config.geometry
    omega = config.omega

    if kind == "plane_wave":
        medium = config.materials["medium"]
        side = geo.get("side") or (2.0 * (2.0 * math.pi / omega)
                                   * _principal_speed(medium, config.family))
        half = side / 2.0
        mapping = identity_mapping(-half, half, -half, half)
        regions = [MaterialRegion("medium", medium, _everywhere)]
        direction = (math.sin(config.angle), -math.cos(config.angle))
        field = _plane_field(medium, config.family, omega, direction,
                             config.viscous)
    elif kind == "interface_rt":
        upper = config.materials["upper"]
        lower = config.materials["lower"]
        ref_family = ("acoustic" if isinstance(upper, FluidMaterial)
                      else "fast_P")
        side = geo.get("side") or (2.0 * (2.0 * math.pi / omega)
                                   * _principal_speed(upper, ref_family))
        half = side / 2.0
        mapping = identity_mapping(-half, half, -half, half)
        regions = [
            MaterialRegion("upper", upper, lambda x, z: np.asarray(z) > 0.0),
            MaterialRegion("lower", lower, _everywhere),
        ]
        field = _interface_field(config)
    elif kind == "scatterer":
        bath = config.materials["bath"]
        cylinder = config.materials["cylinder"]
        radius = geo["radius"]
        mapping = square_to_circle_mapping(radius, geo["half_width"],
                                           geo.get("blend_radius"))
        regions = [
            MaterialRegion(
                "cylinder", cylinder,
                lambda x, z: np.hypot(np.asarray(x), np.asarray(z)) <= radius),
            MaterialRegion("bath", bath, _everywhere),
        ]
        field = _embedded_cylinder_field(bath, omega, radius)
    elif kind == "femur":
        bath = config.materials["bath"]
        r_core, r_outer = geo["r_core"], geo["r_outer"]
        mapping = femur_annulus_mapping(r_core, r_outer, geo["half_width"],
                                        geo.get("blend_radius"))

        def _within(limit):
            return lambda x, z: (np.hypot(np.asarray(x), np.asarray(z))
                                 <= limit)

        regions = [
            MaterialRegion("core", config.materials["core"], _within(r_core)),
            MaterialRegion("shell", config.materials["shell"],
                           _within(r_outer)),
            MaterialRegion("bath", bath, _everywhere),
        ]
        sigma_x = bath.sound_speed / (2.0 * math.pi
                                      * config.pulse["sigma_frequency"])
        x_peak = -(r_outer + config.pulse["standoff"])
        carrier = config.pulse["carrier"]
        carrier_k = (2.0 * math.pi * carrier / bath.sound_speed
                     if carrier else 0.0)
        field = _pressure_pulse_field(bath, config.pulse["peak"], sigma_x,
                                      x_peak, carrier_k)
    else:
        raise HarnessError(f"kind {kind!r} cannot be assembled")

    try:
        grid = build_grid(mapping, n1, n2, regions)
    except (GridBuildError, ValueError) as exc:
        raise HarnessError(f"{config.source}: grid build failed: {exc}") \
            from exc

    omit_line = n2 // 2 if config.second_order == "omit_on_line" else None
    default_boundary = ("extrapolate_zero_order" if kind == "femur"
                        else "analytic_fill")
    boundary = config.boundary or default_boundary
    step = StepConfig(
        cfl_target=config.cfl, limiter=config.limiter,
        second_order=config.second_order, omit_line=omit_line,
        boundary=boundary,
        field=field if boundary == "analytic_fill" else None,
        eta_d=config.eta_d, zeta=config.zeta)

    t_end = _to_seconds(config.duration, omega, "duration")
    snapshot = None
    if config.snapshot_interval is not None:
        snapshot = _to_seconds(config.snapshot_interval, omega,
                               "snapshot_interval")
        if not snapshot > 0.0:
            raise HarnessError("snapshot_interval must be positive")

    return RunSetup(grid=grid, step=step, field=field, omega=omega,
                    t_end=t_end, snapshot_seconds=snapshot)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _out_dir(args, config: ScenarioConfig) -> Path:
    out = Path(args.out) if args.out else Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _advance_checked(state, setup: RunSetup, on_step=None):
    last = {"state": state}

    def hook(st):
        last["state"] = st
        if on_step is not None:
            on_step(st)

    try:
        return advance(state, setup.t_end, setup.step, on_step=hook)
    except HarnessError:
        raise
    except Exception as exc:
        st = last["state"]
        raise HarnessError(
            f"solver failed near step {st.step}, t = {st.time:.6e} s: "
            f"{exc}") from exc


def _write_manifest(out: Path, config: ScenarioConfig, command: str, args,
                    extra: dict):
    lines = [
        f"command = {command}",
        f"config = {config.source}",
        f"python = {platform.python_version()}",
        f"numpy = {np.__version__}",
        f"porowave = {__version__}",
        f"threads = {getattr(args, 'threads', 1)}",
    ]
    lines += [f"{k} = {v}" for k, v in extra.items()]
    lines += ["", "-- config --"]
    lines += config.text.splitlines()
    (out / "manifest.txt").write_text("\n".join(lines) + "\n",
                                      encoding="utf-8")


def cmd_run(args) -> int:
    config = load_config(args.config)
    setup = assemble(config)
    out = _out_dir(args, config)
    started = time.perf_counter()

    aux = out / f"{config.prefix}.grid"
    state = initialize_state(setup.grid, setup.field)
    dump_field(state, out / f"{config.prefix}_0000.pwv1", aux_stem=aux)

    counter = {"idx": 1, "mark": setup.snapshot_seconds}
    slack = 1e-9 * setup.t_end

    def on_step(st):
        while (counter["mark"] is not None
               and st.time >= counter["mark"] - slack):
            name = f"{config.prefix}_{counter['idx']:04d}.pwv1"
            dump_field(st, out / name, aux_stem=aux)
            counter["idx"] += 1
            counter["mark"] += setup.snapshot_seconds
            if counter["mark"] > setup.t_end + slack:
                counter["mark"] = None

    state = _advance_checked(
        state, setup, on_step if setup.snapshot_seconds else None)
    dump_field(state, out / f"{config.prefix}_final.pwv1", aux_stem=aux)
    dump_energy(state, out / f"{config.prefix}_energy_final.pwv1",
                aux_stem=aux)
    _write_manifest(out, config, "run", args, {
        "steps": state.step,
        "final_time": repr(state.time),
        "snapshots": counter["idx"],
        "elapsed_seconds": f"{time.perf_counter() - started:.3f}",
    })
    return 0


def _convergence_member(job) -> "ErrorReport":
    """One grid of a refinement ladder; module-level so pools can run it."""
    path, n = job
    config = load_config(path)
    setup = assemble(config, n=n)
    state = initialize_state(setup.grid, setup.field)
    state = _advance_checked(state, setup)
    return grid_error(state, setup.field, weighting="area",
                      scenario=config.title or config.prefix)


def _refinement_gap(coarse, fine) -> tuple[float, float]:
    """Energy norms of (restricted fine) minus coarse, capacity weighted."""
    cg, fg = coarse.grid, fine.grid
    qf = fine.q
    wf = fg.capacities
    # capacity-weighted 2x2 block average onto the coarse cells
    wq = (qf * wf[..., None]).reshape(cg.N1, 2, cg.N2, 2, 8).sum(axis=(1, 3))
    wsum = wf.reshape(cg.N1, 2, cg.N2, 2).sum(axis=(1, 3))
    restricted = wq / wsum[..., None]
    diff = restricted - coarse.q

    cell = np.zeros((cg.N1, cg.N2))
    for j, mat in enumerate(cg.materials):
        mask = cg.material_index == j
        if not mask.any():
            continue
        E = global_coefficients(mat).E8()
        d = diff[mask]
        cell[mask] = np.sqrt(np.einsum("ci,ij,cj->c", d, E, d))
    w = cg.capacities
    return float((w * cell).sum() / w.sum()), float(cell.max())


def _richardson_rows(config: ScenarioConfig, grids) -> list[list]:
    if len(grids) < 2:
        raise HarnessError("need at least 2 grid sizes for self-comparison")
    for a, b in zip(grids, grids[1:]):
        if b != 2 * a:
            raise HarnessError(
                f"self-comparison needs each grid size doubled: got {a} "
                f"then {b}")
    name = config.title or config.prefix
    prev = None
    gaps = []
    for n in grids:
        setup = assemble(config, n=n)
        state = initialize_state(setup.grid, setup.field)
        state = _advance_checked(state, setup)
        if prev is not None:
            gaps.append(_refinement_gap(prev, state))
        prev = state

    coarse_ns = list(grids[:-1])
    if len(gaps) >= 3:
        fit = fit_rate([(n, g[0]) for n, g in zip(coarse_ns, gaps)])
        rate, r2 = repr(fit.rate), repr(fit.r_squared)
    elif len(gaps) == 2:
        slope = (math.log(gaps[0][0] / gaps[1][0])
                 / math.log(coarse_ns[1] / coarse_ns[0]))
        rate, r2 = repr(slope), repr(1.0)
    else:
        rate, r2 = "", ""
    rows = []
    for n, (g1, gm) in zip(coarse_ns, gaps):
        rows.append([name, n, n, repr(g1), repr(gm), rate, r2])
    return rows


def cmd_convergence(args) -> int:
    config = load_config(args.config)
    if args.grids:
        try:
            grids = tuple(int(p) for p in args.grids.split(",") if p.strip())
        except ValueError:
            raise HarnessError(
                f"cannot read --grids {args.grids!r}") from None
    else:
        grids = config.grids
    if not grids:
        raise HarnessError("no grid list: give [grid] grids or --grids")
    out = _out_dir(args, config)
    started = time.perf_counter()
    csv_path = out / f"{config.prefix}_convergence.csv"

    if config.kind == "scatterer":
        rows = _richardson_rows(config, grids)
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["scenario", "N1", "N2", "norm1", "normMax",
                             "rate", "r2"])
            writer.writerows(rows)
    else:
        if len(grids) < 3:
            raise HarnessError(
                f"need at least 3 grid sizes to fit a rate, got "
                f"{len(grids)}")
        jobs = [(str(args.config), n) for n in grids]
        threads = getattr(args, "threads", 1) or 1
        if threads > 1:
            with ProcessPoolExecutor(
                    max_workers=min(threads, len(jobs))) as pool:
                reports = list(pool.map(_convergence_member, jobs))
        else:
            reports = [_convergence_member(job) for job in jobs]
        result = ConvergenceResult(
            reports=tuple(reports),
            fit_norm1=fit_rate([(rep.dims[0], rep.norm1) for rep in reports]),
            fit_max=fit_rate([(rep.dims[0], rep.norm_max)
                              for rep in reports]))
        write_convergence_csv(csv_path, result)

    _write_manifest(out, config, "convergence", args, {
        "grids": ",".join(str(g) for g in grids),
        "elapsed_seconds": f"{time.perf_counter() - started:.3f}",
    })
    return 0


def cmd_zeta_sweep(args) -> int:
    config = load_config(args.config)
    for role in ("upper", "lower"):
        if role not in config.materials:
            raise HarnessError(
                f"zeta-sweep needs upper and lower materials; kind "
                f"{config.kind!r} has no {role!r}")
    upper = config.materials["upper"]
    lower = config.materials["lower"]
    pair = (f"{config.material_names['upper']}-"
            f"{config.material_names['lower']}")
    out = _out_dir(args, config)
    zetas = np.linspace(0.0, 1.0, config.sweep["zeta_points"])
    with open(out / f"{config.prefix}_zeta.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pair", "eta_d", "zeta", "cond"])
        for eta_d in config.sweep["eta_d"]:
            for zeta in zetas:
                ctx = edge_context(upper, lower, (0.0, -1.0), eta_d=eta_d,
                                   zeta=float(zeta), label_left="upper",
                                   label_right="lower")
                cond = interface_condition_number(ctx)
                writer.writerow([pair, repr(eta_d), repr(float(zeta)),
                                 repr(cond)])
    _write_manifest(out, config, "zeta-sweep", args, {})
    return 0


def cmd_rt_coefficients(args) -> int:
    config = load_config(args.config)
    if config.kind != "interface_rt":
        raise HarnessError(
            f"rt-coefficients needs an interface_rt config, got "
            f"{config.kind!r}")
    upper = config.materials["upper"]
    lower = config.materials["lower"]
    angles = config.angles or (config.angle,)
    out = _out_dir(args, config)
    with open(out / f"{config.prefix}_coefficients.csv", "w",
              newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["angle_deg", "side", "index", "k_normal_re",
                         "k_normal_im", "beta_re", "beta_im", "flux"])
        for angle in angles:
            direction = (math.sin(angle), -math.cos(angle))
            spec = PlaneWaveSpec(omega=config.omega, direction=direction,
                                 family=config.family, material=upper,
                                 viscous=config.viscous)
            af = reflect_transmit(upper, lower, spec, eta_d=config.eta_d,
                                  zeta=config.zeta)
            deg = repr(math.degrees(angle))

            def emit(side, idx, comp, material):
                flux = normal_energy_flux(comp.beta * comp.V, material,
                                          af.normal, config.omega)
                writer.writerow([deg, side, idx,
                                 repr(float(np.real(comp.k_normal))),
                                 repr(float(np.imag(comp.k_normal))),
                                 repr(float(np.real(comp.beta))),
                                 repr(float(np.imag(comp.beta))),
                                 repr(flux)])

            emit("incident", 0, af.incident, upper)
            for i, comp in enumerate(af.reflected):
                emit("reflected", i, comp, upper)
            for i, comp in enumerate(af.transmitted):
                emit("transmitted", i, comp, lower)
    _write_manifest(out, config, "rt-coefficients", args, {})
    return 0


def cmd_dump_grid(args) -> int:
    config = load_config(args.config)
    setup = assemble(config)
    grid = setup.grid
    out = _out_dir(args, config)
    prefix = config.prefix
    sidecar = {
        "kind": "grid",
        "n1": grid.N1,
        "n2": grid.N2,
        "materials": ",".join(grid.labels),
        "mapping": grid.mapping.kind,
    }
    write_array(out / f"{prefix}.mat.pwv1",
                grid.material_index.astype(float), sidecar=sidecar)
    write_array(out / f"{prefix}.xy.pwv1", grid.centroids)
    write_array(out / f"{prefix}.kappa.pwv1", grid.capacities)
    _write_manifest(out, config, "dump-grid", args, {})
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="porowave",
        description="finite volume waves in porous media: scenario runner")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="scenario INI file")
        p.add_argument("--out", default=None,
                       help="output directory (default from the config)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker processes for independent runs")

    run = sub.add_parser("run", help="simulate and dump snapshots")
    common(run)
    run.set_defaults(handler=cmd_run)

    conv = sub.add_parser("convergence", help="refinement study")
    common(conv)
    conv.add_argument("--grids", default=None,
                      help="comma-separated grid sizes, overrides the config")
    conv.set_defaults(handler=cmd_convergence)

    zeta = sub.add_parser("zeta-sweep",
                          help="interface solve conditioning table")
    common(zeta)
    zeta.set_defaults(handler=cmd_zeta_sweep)

    rt = sub.add_parser("rt-coefficients",
                        help="analytic reflection/transmission table")
    common(rt)
    rt.set_defaults(handler=cmd_rt_coefficients)

    dump = sub.add_parser("dump-grid",
                          help="write material map, centroids, capacities")
    common(dump)
    dump.set_defaults(handler=cmd_dump_grid)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (HarnessError, FieldIOError, VerifyError, GridBuildError,
            SolverConfigError, AnalyticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
