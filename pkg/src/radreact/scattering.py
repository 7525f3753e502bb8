"""
Dipole scattering by the driven oscillator.

With R~ = e f(k0) alpha E0 the radiated field, scattering amplitude and total
cross section follow in closed form; the optical theorem

    sigma_t = (4 pi / k) Im[e0* . f(k0, k0)]

is then equivalent to  Im alpha = (2 e^2 w^3 / 3 c^3) |alpha|^2 |f(k0)|^2.
The form-factor product f*(ks) f(k0) with |ks| = |k0| makes the total cross
section carry |f(k0)|^4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidGeometry, NotDilute, ZeroRadius
from .params import PhysicalParams
from .response import FormFactor, ResponseModel

GEOMETRY_RTOL = 1e-12
DILUTE_LIMIT = 0.1


@dataclass(frozen=True, eq=False)
class ScatteringGeometry:
    """Incident wavevector k0, polarization e0hat (real, unit, transverse), scattered ks."""

    k0: np.ndarray
    e0hat: np.ndarray
    ks: np.ndarray

    def __post_init__(self):
        k0 = np.asarray(self.k0, dtype=float)
        e0 = np.asarray(self.e0hat, dtype=float)
        ks = np.asarray(self.ks, dtype=float)
        if k0.shape != (3,) or e0.shape != (3,) or ks.shape != (3,):
            raise InvalidGeometry("k0, e0hat and ks must be 3-vectors")
        k = np.linalg.norm(k0)
        if not k > 0:
            raise InvalidGeometry("incident wavevector must be nonzero")
        if abs(np.linalg.norm(e0) - 1.0) > GEOMETRY_RTOL:
            raise InvalidGeometry("polarization must be a unit vector")
        if abs(e0 @ k0) > GEOMETRY_RTOL * k:
            raise InvalidGeometry("polarization must be transverse to k0")
        if abs(np.linalg.norm(ks) - k) > GEOMETRY_RTOL * k:
            raise InvalidGeometry("scattering must be elastic (|ks| = |k0|)")
        object.__setattr__(self, "k0", k0)
        object.__setattr__(self, "e0hat", e0)
        object.__setattr__(self, "ks", ks)

    @property
    def k(self) -> float:
        return float(np.linalg.norm(self.k0))

    @classmethod
    def forward(cls, k: float, direction=(0.0, 0.0, 1.0), polarization=(1.0, 0.0, 0.0)):
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        return cls(k * d, np.asarray(polarization, dtype=float), k * d)


@dataclass(frozen=True)
class ScatteringReport:
    omega: float
    forward_amplitude: complex
    sigma_total_integrated: float
    sigma_total_optical: float
    residual_relative: float
    residual_identity: float

    def as_row(self, alpha: complex) -> dict:
        return {
            "omega": self.omega,
            "re_alpha": alpha.real,
            "im_alpha": alpha.imag,
            "sigma_integrated": self.sigma_total_integrated,
            "sigma_optical": self.sigma_total_optical,
            "residual": self.residual_relative,
        }


def radiation_zone_field(
    params: PhysicalParams, form_factor: FormFactor, R_tilde, geometry: ScatteringGeometry, r: float
):
    """Far field e f*(ks) k^2 [R~ - (rhat.R~) rhat] e^{ikr}/r along rhat = ks/|ks|."""
    if not r > 0:
        raise ZeroRadius(f"observation radius must be positive, got {r!r}")
    R = np.asarray(R_tilde, dtype=complex)
    k = geometry.k
    rhat = geometry.ks / np.linalg.norm(geometry.ks)
    f_s = float(form_factor.amplitude(k, params.c))
    transverse = R - (rhat @ R) * rhat
    return params.charge * f_s * k * k * transverse * np.exp(1j * k * r) / r


def scattering_amplitude(
    params: PhysicalParams, form_factor: FormFactor, alpha_value: complex, geometry: ScatteringGeometry
):
    """Vector amplitude f*(ks) f(k0) e^2 alpha (k^2 e0 - (ks.e0) ks)  (cm)."""
    k = geometry.k
    f_s = float(form_factor.amplitude(np.linalg.norm(geometry.ks), params.c))
    f_0 = float(form_factor.amplitude(k, params.c))
    e0 = geometry.e0hat
    ks = geometry.ks
    return f_s * f_0 * params.charge**2 * alpha_value * (k * k * e0 - (ks @ e0) * ks)


def sigma_total_integrated(
    params: PhysicalParams, form_factor: FormFactor, alpha_value, omega, eq13_exponent: int = 4
):
    """Closed-form total cross section (8 pi/3) k^4 |f(k0)|^p e^4 |alpha|^2, p = 4 by default.

    ``eq13_exponent=2`` gives the variant with a single factor pair, for comparison only.
    """
    if eq13_exponent not in (2, 4):
        raise ValueError("eq13_exponent must be 2 or 4")
    omega = np.asarray(omega, dtype=float)
    k = omega / params.c
    fsq = form_factor.at_omega(omega, params.c)
    ff = fsq * fsq if eq13_exponent == 4 else fsq
    out = 8.0 * math.pi / 3.0 * k**4 * ff * params.charge**4 * np.abs(alpha_value) ** 2
    return out if out.ndim else float(out)


def sigma_total_optical(params: PhysicalParams, form_factor: FormFactor, alpha_value, omega):
    """(4 pi / k) Im[e0* . f_forward] with f_forward = k^2 |f(k0)|^2 e^2 alpha e0."""
    omega = np.asarray(omega, dtype=float)
    k = omega / params.c
    fsq = form_factor.at_omega(omega, params.c)
    forward = k * k * fsq * params.charge**2 * np.asarray(alpha_value)
    out = 4.0 * math.pi / k * forward.imag
    return out if out.ndim else float(out)


def optical_theorem_identity_residual(params: PhysicalParams, form_factor: FormFactor, alpha_value, omega):
    """|Im a - (2e^2 w^3/3c^3)|a|^2|f|^2| / |Im a|."""
    omega = np.asarray(omega, dtype=float)
    a = np.asarray(alpha_value)
    fsq = form_factor.at_omega(omega, params.c)
    rhs = params.radiation_coefficient * omega**3 * np.abs(a) ** 2 * fsq
    out = np.abs(a.imag - rhs) / np.abs(a.imag)
    return out if out.ndim else float(out)


def optical_theorem_residual(
    model: ResponseModel,
    omega: float,
    form_factor: Optional[FormFactor] = None,
    eq13_exponent: int = 4,
) -> ScatteringReport:
    """Optical-theorem check at one frequency.

    ``form_factor`` defaults to the model's own; passing a different one
    (e.g. a finite-size factor with the point model) exposes the mismatch.
    """
    params = model.params
    ff = model.form_factor if form_factor is None else form_factor
    omega = float(omega)
    if not omega > 0:
        raise ValueError("optical theorem check needs omega > 0")
    a = complex(model.alpha(omega))
    k = omega / params.c
    fwd = scattering_amplitude(params, ff, a, ScatteringGeometry.forward(k))
    s_int = float(sigma_total_integrated(params, ff, a, omega, eq13_exponent))
    s_opt = float(4.0 * math.pi / k * np.vdot(np.array([1.0, 0.0, 0.0]), fwd).imag)
    return ScatteringReport(
        omega=omega,
        forward_amplitude=complex(fwd[0]),
        sigma_total_integrated=s_int,
        sigma_total_optical=s_opt,
        residual_relative=abs(s_int - s_opt) / abs(s_opt),
        residual_identity=float(optical_theorem_identity_residual(params, ff, a, omega)),
    )


def optical_theorem_sweep(model: ResponseModel, omegas, form_factor=None, eq13_exponent: int = 4) -> dict:
    """Vectorized optical-theorem residuals over a frequency array."""
    params = model.params
    ff = model.form_factor if form_factor is None else form_factor
    w = np.asarray(omegas, dtype=float)
    a = np.asarray(model.alpha(w))
    s_int = sigma_total_integrated(params, ff, a, w, eq13_exponent)
    s_opt = sigma_total_optical(params, ff, a, w)
    return {
        "omega": w,
        "alpha": a,
        "sigma_integrated": s_int,
        "sigma_optical": s_opt,
        "residual": np.abs(s_int - s_opt) / np.abs(s_opt),
        "residual_identity": optical_theorem_identity_residual(params, ff, a, w),
    }


def rayleigh_cross_section_via_index(model: ResponseModel, omega, N: float):
    """Dilute-gas cross section |n^2 - 1|^2 / (6 pi N^2) (w/c)^4, n^2 = 1 + 4 pi N e^2 alpha.

    Raises NotDilute when |n^2 - 1| > 0.1 anywhere.  Near a resonance the
    square of a complex susceptibility is replaced by its modulus squared.
    """
    if not N > 0:
        raise ValueError("number density must be positive")
    params = model.params
    w = np.asarray(omega, dtype=float)
    chi = 4.0 * math.pi * N * params.charge**2 * np.asarray(model.alpha(w))
    if np.any(np.abs(chi) > DILUTE_LIMIT):
        raise NotDilute(f"|n^2 - 1| = {np.max(np.abs(chi)):.3g} exceeds {DILUTE_LIMIT}")
    out = np.abs(chi) ** 2 / (6.0 * math.pi * N * N) * (w / params.c) ** 4
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Angular quadrature
# ---------------------------------------------------------------------------


def integrate_sphere(func, rtol: float = 1e-9, start: int = 8, max_nodes: int = 1024) -> float:
    """Integral of func(nhat) over the unit sphere.

    Gauss-Legendre in cos(theta) times the periodic trapezoid rule in phi,
    doubling both until two successive estimates agree to ``rtol``.  The
    nodes are fixed, so results are reproducible bit for bit.
    """
    prev = None
    n = start
    while n <= max_nodes:
        x, wx = np.polynomial.legendre.leggauss(n)
        phi = 2.0 * math.pi * np.arange(2 * n) / (2 * n)
        sin_t = np.sqrt(1.0 - x * x)
        nx = np.outer(sin_t, np.cos(phi))
        ny = np.outer(sin_t, np.sin(phi))
        nz = np.outer(x, np.ones_like(phi))
        vals = func(np.stack([nx, ny, nz], axis=-1))
        est = float(np.sum(wx[:, None] * vals) * (2.0 * math.pi / (2 * n)))
        if prev is not None and abs(est - prev) <= rtol * abs(est):
            return est
        prev = est
        n *= 2
    raise ArithmeticError("angular quadrature did not converge")


def sigma_total_by_quadrature(
    params: PhysicalParams, form_factor: FormFactor, alpha_value: complex, omega: float,
    rtol: float = 1e-9,
) -> float:
    """Integrate |f(ks, k0)|^2 over all scattering directions."""
    k = omega / params.c
    e0 = np.array([1.0, 0.0, 0.0])
    fsq = float(form_factor.at_omega(omega, params.c))
    pref = fsq * params.charge**2 * alpha_value

    def dsigma(nhat):
        ks = k * nhat
        amp = pref * (k * k * e0 - (ks @ e0)[..., None] * ks)
        return np.sum(np.abs(amp) ** 2, axis=-1)

    return integrate_sphere(dsigma, rtol=rtol)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

SCATTERING_COLUMNS = ("omega", "re_alpha", "im_alpha", "sigma_integrated", "sigma_optical", "residual")


def scattering_rows(sweep: dict):
    for i in range(sweep["omega"].size):
        a = complex(sweep["alpha"][i])
        yield (
            sweep["omega"][i], a.real, a.imag,
            sweep["sigma_integrated"][i], sweep["sigma_optical"][i], sweep["residual"][i],
        )


def scattering_summary(model: ResponseModel, sweep: dict) -> dict:
    w = sweep["omega"]
    return {
        "model": model.name,
        "form_factor": model.form_factor.describe(),
        "grid": {"min": float(w[0]), "max": float(w[-1]), "points": int(w.size)},
        "max_residual": float(np.max(sweep["residual"])),
    }
