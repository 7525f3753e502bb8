"""
Physical parameters of the radiating oscillator (Gaussian CGS units).

Every quantity in the package is expressed in Gaussian units: charge in esu,
mass in g, lengths in cm, times in s, angular frequencies in rad/s.  The
derived radiation-reaction time is

    tau_e = 2 e^2 / (3 M c^3)

and the bare mass left over after electromagnetic mass renormalization with
a Lorentzian form factor of cutoff Omega is m = M (1 - tau_e Omega).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    ConfigError,
    InvalidParameter,
    NegativeBareMass,
    NonFiniteInput,
    NonPositiveMass,
)

CRITICAL = "critical"

# Electron in Gaussian units; the resonance is hydrogen's first optical line.
PRESETS = {
    "electron-cgs": {
        "charge": 4.80320e-10,
        "mass": 9.10938e-28,
        "c": 2.99792458e10,
        "omega0": 2.45e15,
        "cutoff": CRITICAL,
    },
}

# tau_e * Omega may exceed 1 by a few ulps when Omega was computed as 1/tau_e.
_CRITICAL_RTOL = 8 * np.finfo(float).eps


@dataclass(frozen=True)
class PhysicalParams:
    """Immutable parameter record.

    Attributes
    ----------
    charge : float
        Particle charge e (esu).
    mass : float
        Observed (renormalized) mass M (g).
    c : float
        Speed of light (cm/s).
    omega0 : float
        Resonance angular frequency (rad/s).
    cutoff : float
        Form-factor cutoff Omega (rad/s).
    critical : bool
        True when Omega = 1/tau_e, in which case the bare mass is exactly 0.
    """

    charge: float
    mass: float
    c: float
    omega0: float
    cutoff: float
    critical: bool = False

    def __post_init__(self):
        for name in ("charge", "mass", "c", "omega0", "cutoff"):
            if not math.isfinite(getattr(self, name)):
                raise NonFiniteInput(f"{name} must be finite, got {getattr(self, name)!r}")
        if self.mass <= 0:
            raise NonPositiveMass(f"observed mass must be positive, got {self.mass!r}")
        if self.charge == 0:
            raise InvalidParameter("charge must be nonzero")
        if self.c <= 0:
            raise InvalidParameter(f"speed of light must be positive, got {self.c!r}")
        if self.omega0 < 0:
            raise InvalidParameter(f"omega0 must be >= 0, got {self.omega0!r}")
        if self.cutoff <= 0:
            raise InvalidParameter(f"cutoff must be positive, got {self.cutoff!r}")
        x = self.tau_e * self.cutoff
        if x > 1 + _CRITICAL_RTOL:
            raise NegativeBareMass(
                f"cutoff {self.cutoff:.6g} rad/s exceeds 1/tau_e = {1 / self.tau_e:.6g} rad/s "
                "(bare mass would be negative)"
            )
        if not self.critical and abs(x - 1) <= _CRITICAL_RTOL:
            object.__setattr__(self, "critical", True)

    @property
    def tau_e(self) -> float:
        """Radiation-reaction time 2e^2/(3Mc^3) in s."""
        return 2.0 * self.charge**2 / (3.0 * self.mass * self.c**3)

    @property
    def spring_K(self) -> float:
        return self.mass * self.omega0**2

    @property
    def bare_mass(self) -> float:
        if self.critical:
            return 0.0
        return self.mass * (1.0 - self.tau_e * self.cutoff)

    @property
    def gamma(self) -> float:
        """Resonance linewidth omega0^2 tau_e (1/s)."""
        return self.omega0**2 * self.tau_e

    @property
    def radiation_coefficient(self) -> float:
        """2e^2/(3c^3) = M tau_e, the Larmor drag coefficient (g s)."""
        return 2.0 * self.charge**2 / (3.0 * self.c**3)

    def replace(self, **changes) -> "PhysicalParams":
        values = dict(
            charge=self.charge, mass=self.mass, c=self.c, omega0=self.omega0, cutoff=self.cutoff
        )
        keep_critical = self.critical and "cutoff" not in changes
        values.update(changes)
        if keep_critical:
            return make_params(
                values["charge"], values["mass"], values["c"], values["omega0"], CRITICAL
            )
        return make_params(**{k: values[k] for k in ("charge", "mass", "c", "omega0", "cutoff")})

    def as_dict(self) -> dict:
        return {
            "charge": self.charge,
            "mass": self.mass,
            "c": self.c,
            "omega0": self.omega0,
            "cutoff": self.cutoff,
            "critical": self.critical,
            "tau_e": self.tau_e,
            "spring_K": self.spring_K,
            "bare_mass": self.bare_mass,
        }


def make_params(
    charge: float,
    mass: float,
    c: float,
    omega0: float,
    cutoff: Union[float, str] = CRITICAL,
) -> PhysicalParams:
    """Build a validated :class:`PhysicalParams`.

    ``cutoff="critical"`` selects Omega = 1/tau_e, the largest cutoff that
    keeps the bare mass non-negative; the bare mass is then exactly zero.
    """
    values = {"charge": charge, "mass": mass, "c": c, "omega0": omega0}
    for name, v in values.items():
        try:
            v = float(v)
        except (TypeError, ValueError) as exc:
            raise NonFiniteInput(f"{name} is not a number: {v!r}") from exc
        if not math.isfinite(v):
            raise NonFiniteInput(f"{name} must be finite, got {v!r}")
        values[name] = v
    if values["mass"] <= 0:
        raise NonPositiveMass(f"observed mass must be positive, got {values['mass']!r}")
    if values["c"] <= 0:
        raise InvalidParameter(f"speed of light must be positive, got {values['c']!r}")

    if isinstance(cutoff, str):
        if cutoff.strip().lower() != CRITICAL:
            try:
                cutoff = float(cutoff)
            except ValueError as exc:
                raise InvalidParameter(f"cutoff must be a number or 'critical', got {cutoff!r}") from exc
    if isinstance(cutoff, str):
        tau = 2.0 * values["charge"] ** 2 / (3.0 * values["mass"] * values["c"] ** 3)
        if tau <= 0:
            raise InvalidParameter("charge must be nonzero")
        return PhysicalParams(cutoff=1.0 / tau, critical=True, **values)
    return PhysicalParams(cutoff=float(cutoff), **values)


def preset(name: str = "electron-cgs", **overrides) -> PhysicalParams:
    """Parameters from a named preset, with optional field overrides."""
    try:
        values = dict(PRESETS[name])
    except KeyError as exc:
        raise ConfigError(f"unknown preset {name!r}; known: {sorted(PRESETS)}") from exc
    values.update({k: v for k, v in overrides.items() if v is not None})
    return make_params(**values)


def classical_electron_radius(params: PhysicalParams) -> float:
    """r0 = e^2/(M c^2) in cm."""
    return params.charge**2 / (params.mass * params.c**2)


def thomson_cross_section(params: PhysicalParams) -> float:
    return 8.0 * math.pi / 3.0 * classical_electron_radius(params) ** 2


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Strictly increasing set of real angular frequencies (rad/s)."""

    points: np.ndarray
    spacing: str = "linear"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 1:
            raise InvalidParameter("frequency grid must be a non-empty 1-D array")
        if not np.all(np.isfinite(pts)):
            raise NonFiniteInput("frequency grid contains non-finite points")
        if pts.size > 1 and not np.all(np.diff(pts) > 0):
            raise InvalidParameter("frequency grid must be strictly increasing")
        if self.spacing not in ("linear", "logarithmic"):
            raise InvalidParameter(f"unknown grid spacing {self.spacing!r}")
        if self.spacing == "logarithmic" and pts[0] <= 0:
            raise InvalidParameter("logarithmic grids must be strictly positive")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def linear(cls, lo: float, hi: float, n: int) -> "FrequencyGrid":
        _check_bounds(lo, hi, n)
        return cls(np.linspace(lo, hi, n), "linear")

    @classmethod
    def logarithmic(cls, lo: float, hi: float, n: int) -> "FrequencyGrid":
        _check_bounds(lo, hi, n)
        if lo <= 0:
            raise InvalidParameter("logarithmic grids must be strictly positive")
        return cls(np.logspace(math.log10(lo), math.log10(hi), n), "logarithmic")

    def __len__(self):
        return self.points.size

    def __iter__(self):
        return iter(self.points)

    @property
    def decades(self) -> float:
        if self.points[0] <= 0:
            return math.inf
        return math.log10(self.points[-1] / self.points[0])

    def points_per_decade(self) -> float:
        d = self.decades
        if d == 0 or math.isinf(d):
            return math.inf if math.isinf(d) else 0.0
        return (self.points.size - 1) / d


def _check_bounds(lo, hi, n):
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise NonFiniteInput("grid bounds must be finite")
    if not lo < hi:
        raise InvalidParameter(f"grid min must be < max, got [{lo}, {hi}]")
    if int(n) < 2:
        raise InvalidParameter(f"grid needs at least 2 points, got {n}")


CONFIG_KEYS = {
    "preset": str,
    "charge": float,
    "mass": float,
    "c": float,
    "omega0": float,
    "cutoff": str,
    "omega0_units": str,
    "model": str,
    "grid_min": float,
    "grid_max": float,
    "points": int,
    "spacing": str,
    "out": str,
    "threads": int,
    "eq13_exponent": int,
}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines.  ``#`` starts a comment; unknown keys are errors."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {value!r}") from exc
    return out


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())
