"""
Linear response of a radiating harmonic oscillator.

The polarizability alpha(omega) maps a force phasor F e^{-i omega t} to the
displacement phasor R = alpha F (units s^2/g).  Three closed forms are
provided:

* point electron, third-derivative radiation reaction::

      alpha = 1 / (M (omega0^2 - omega^2 - i omega^3 tau_e))

* finite electron with Lorentzian form factor at the critical cutoff
  Omega = 1/tau_e (bare mass zero)::

      alpha = (1 - i omega tau_e) / (M (omega0^2 - omega^2 - i gamma omega)),
      gamma = omega0^2 tau_e

* arbitrary form factor, through the half-line transform of the memory kernel::

      alpha = 1 / (-m omega^2 - i omega mu~(omega) + K)

For the Lorentzian factor |f|^2 = Omega^2 / (Omega^2 + c^2 k^2) the kernel is
mu(t) = M Omega^2 tau_e [2 delta(t) - Omega exp(-Omega t)] and its transform is
mu~(omega) = M Omega^2 tau_e omega / (omega + i Omega).  The delta at the
endpoint of the half line carries half its weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from .errors import (
    InconsistentWavevector,
    InvalidParameter,
    NegativeBareMass,
    NegativeTime,
    PoleEvaluation,
    UnsupportedFormFactor,
    WrongCutoff,
)
from .params import PhysicalParams

POLE_RTOL = 1e-8


# ---------------------------------------------------------------------------
# Form factors
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FormFactor:
    """Squared modulus |f(k)|^2 of the charge-distribution form factor.

    Use the ``point``, ``lorentzian`` and ``tabulated`` constructors.  The
    charge distribution is taken to be real and spherically symmetric, so
    f(k) = sqrt(|f(k)|^2) is real and depends on |k| only.
    """

    kind: str
    cutoff: float = math.inf
    table_k: Optional[np.ndarray] = None
    table_fsq: Optional[np.ndarray] = None

    @classmethod
    def point(cls) -> "FormFactor":
        return cls("point")

    @classmethod
    def lorentzian(cls, cutoff: float) -> "FormFactor":
        if not (cutoff > 0 and math.isfinite(cutoff)):
            raise InvalidParameter(f"Lorentzian cutoff must be positive and finite, got {cutoff!r}")
        return cls("lorentzian-cutoff", cutoff=float(cutoff))

    @classmethod
    def tabulated(cls, k: Sequence[float], fsq: Sequence[float]) -> "FormFactor":
        """Piecewise-linear |f|^2 in k (1/cm).

        Beyond the last entry |f|^2 falls off as (k_last/k)^2.  A leading
        (0, 1) entry is added when the table does not start at k = 0.
        """
        k = np.asarray(k, dtype=float)
        fsq = np.asarray(fsq, dtype=float)
        if k.ndim != 1 or k.shape != fsq.shape or k.size < 1:
            raise InvalidParameter("form-factor table needs matching 1-D k and |f|^2 columns")
        if not (np.all(np.isfinite(k)) and np.all(np.isfinite(fsq))):
            raise InvalidParameter("form-factor table has non-finite entries")
        if k[0] < 0:
            raise InvalidParameter("form-factor table wavenumbers must be >= 0")
        if k[0] > 0:
            k = np.concatenate(([0.0], k))
            fsq = np.concatenate(([1.0], fsq))
        if fsq[0] != 1.0:
            raise InvalidParameter("form factor must satisfy |f(0)|^2 = 1")
        if np.any(np.diff(k) <= 0):
            raise InvalidParameter("form-factor table wavenumbers must be strictly increasing")
        if np.any(fsq <= 0) or np.any(fsq > 1) or np.any(np.diff(fsq) > 0):
            raise InvalidParameter("|f|^2 must lie in (0, 1] and be non-increasing")
        if k.size < 2:
            raise InvalidParameter("form-factor table needs at least one entry with k > 0")
        k.setflags(write=False)
        fsq.setflags(write=False)
        return cls("tabulated", table_k=k, table_fsq=fsq)

    def modulus_sq(self, k, c: float = 1.0):
        """|f(k)|^2 for wavenumber(s) k in 1/cm (sign of k ignored)."""
        k = np.abs(np.asarray(k, dtype=float))
        if self.kind == "point":
            return np.ones_like(k)
        if self.kind == "lorentzian-cutoff":
            x = c * k / self.cutoff
            return 1.0 / (1.0 + x * x)
        tk, tf = self.table_k, self.table_fsq
        k_last, f_last = tk[-1], tf[-1]
        safe = np.where(k > 0, k, tk[1])
        # power law between knots; linear on the first segment, which starts at k = 0
        loglog = np.exp(np.interp(np.log(safe), np.log(tk[1:]), np.log(tf[1:])))
        first = np.interp(k, tk[:2], tf[:2])
        inside = np.where(k < tk[1], first, loglog)
        outside = f_last * (k_last / safe) ** 2
        return np.where(k <= k_last, inside, outside)

    def amplitude(self, k, c: float = 1.0):
        return np.sqrt(self.modulus_sq(k, c))

    def at_omega(self, omega, c: float):
        """|f(k)|^2 at the free-space wavenumber k = |omega|/c."""
        return self.modulus_sq(np.abs(np.asarray(omega, dtype=float)) / c, c)

    def describe(self) -> str:
        if self.kind == "lorentzian-cutoff":
            return f"lorentzian-cutoff(Omega={self.cutoff:.17g})"
        if self.kind == "tabulated":
            return f"tabulated({self.table_k.size} entries)"
        return "point"


# ---------------------------------------------------------------------------
# Memory kernel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MemoryKernel:
    """mu(t) = 2 w delta(t) + sum_j a_j exp(-r_j t) for t >= 0.

    ``instantaneous_weight`` is w, the weight the endpoint delta contributes
    to a half-line integral.  ``exponential_terms`` holds (a_j, r_j) with
    a_j in g/s^2 (signed) and r_j > 0 in 1/s.
    """

    instantaneous_weight: float
    exponential_terms: Tuple[Tuple[float, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        for amp, rate in self.exponential_terms:
            if not rate > 0:
                raise InvalidParameter(f"exponential rates must be positive, got {rate!r}")

    @property
    def static_moment(self) -> float:
        """mu~(0) = w + sum a_j / r_j, snapped to 0 when it cancels to rounding."""
        terms = [amp / rate for amp, rate in self.exponential_terms]
        total = self.instantaneous_weight + math.fsum(terms)
        scale = abs(self.instantaneous_weight) + sum(abs(t) for t in terms)
        if abs(total) <= 8 * np.finfo(float).eps * scale:
            return 0.0
        return total


def lorentzian_kernel(params: PhysicalParams, cutoff: Optional[float] = None) -> MemoryKernel:
    """Kernel M Omega^2 tau_e [2 delta(t) - Omega exp(-Omega t)]."""
    omega_c = params.cutoff if cutoff is None else float(cutoff)
    weight = params.mass * omega_c**2 * params.tau_e
    return MemoryKernel(weight, ((-weight * omega_c, omega_c),))


def kernel_for(params: PhysicalParams, form_factor: Optional[FormFactor] = None) -> MemoryKernel:
    if form_factor is None:
        return lorentzian_kernel(params)
    if form_factor.kind == "lorentzian-cutoff":
        return lorentzian_kernel(params, form_factor.cutoff)
    raise UnsupportedFormFactor(
        f"form factor {form_factor.kind!r} has no finite exponential kernel representation"
    )


def mu_tilde(kernel: MemoryKernel, omega):
    """Half-line transform  int_0^inf mu(t) e^{i omega t} dt  (g/s).

    Valid for real omega and Im omega >= 0.  Written as
    mu~(0) + i omega sum a_j / (r_j (r_j - i omega)) so the drag-free static
    limit of balanced kernels is exact.
    """
    z = np.asarray(omega, dtype=complex)
    acc = np.zeros_like(z)
    for amp, rate in kernel.exponential_terms:
        acc = acc + (amp / rate) / (rate - 1j * z)
    out = kernel.static_moment + 1j * z * acc
    return out if out.ndim else complex(out)


class KernelSample(NamedTuple):
    smooth: np.ndarray
    delta_coefficient: float


def kernel_time_domain(kernel: MemoryKernel, t) -> KernelSample:
    """Smooth part of mu(t) for t >= 0 and the full coefficient of delta(t).

    A half-line integral picks up ``delta_coefficient / 2``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise NegativeTime("memory kernel is defined for t >= 0 only")
    smooth = np.zeros_like(t)
    for amp, rate in kernel.exponential_terms:
        smooth = smooth + amp * np.exp(-rate * t)
    return KernelSample(smooth, 2.0 * kernel.instantaneous_weight)


# ---------------------------------------------------------------------------
# Tabulated form factors: mu~ on the real axis via a dispersion integral
# ---------------------------------------------------------------------------


def _tabulated_mass_shift(params: PhysicalParams, ff: FormFactor) -> float:
    """Electromagnetic mass (2/pi) M tau_e c int_0^inf |f(k)|^2 dk."""
    k, f = ff.table_k, ff.table_fsq
    # exact integral of the interpolant: linear first segment, power laws after, (k_last/k)^2 tail
    area = 0.5 * (f[0] + f[1]) * k[1] + f[-1] * k[-1]
    ratio = k[2:] / k[1:-1]
    s = np.log(f[2:] / f[1:-1]) / np.log(ratio)
    near = np.abs(s + 1.0) < 1e-8
    seg = np.where(near, np.log(ratio), (ratio ** np.where(near, 0.0, s + 1.0) - 1.0) / np.where(near, 1.0, s + 1.0))
    area += float(np.sum(f[1:-1] * k[1:-1] * seg))
    return 2.0 / math.pi * params.radiation_coefficient * params.c * area


def _tabulated_mu_tilde_real(params: PhysicalParams, ff: FormFactor, omega: float) -> complex:
    """Re mu~ = M tau_e w^2 |f(w/c)|^2; Im mu~ from the dispersion relation of mu~/w.

    Im mu~(w) = -(2w/pi) int_0^inf [h(w') - h(w)] / (w'^2 - w^2) dw',
    h = Re mu~; the subtracted term integrates to zero over the half line.
    """
    sign = -1.0 if omega < 0 else 1.0
    w = abs(float(omega))
    coef = params.radiation_coefficient
    c = params.c

    def h(x):
        return coef * x * x * float(ff.at_omega(x, c))

    hw = h(w)
    if w == 0.0:
        return 0j
    w_last = c * ff.table_k[-1]
    h_inf = coef * ff.table_fsq[-1] * w_last**2

    def integrand(x):
        return (h(x) - hw) / ((x - w) * (x + w))

    knots = c * ff.table_k[1:-1]
    pts = sorted(set(knots.tolist() + ([w] if w < w_last else [])))
    val, _ = integrate.quad(
        integrand, 0.0, w_last, points=pts or None, limit=max(200, 50 * len(pts)),
        epsabs=0.0, epsrel=1e-11,
    )
    if w < w_last:
        val += (h_inf - hw) * (-0.5 / w) * math.log((w_last - w) / (w_last + w))
    im = -2.0 * w / math.pi * val
    return complex(hw, sign * im)


def mu_tilde_form_factor(params: PhysicalParams, form_factor: FormFactor, omega):
    """mu~(omega) implied by a form factor; tabulated factors are real-axis only."""
    if form_factor.kind == "lorentzian-cutoff":
        return mu_tilde(lorentzian_kernel(params, form_factor.cutoff), omega)
    if form_factor.kind == "tabulated":
        z = np.asarray(omega, dtype=complex)
        if np.any(z.imag != 0):
            raise UnsupportedFormFactor("tabulated form factors are evaluated on the real axis only")
        out = np.array([_tabulated_mu_tilde_real(params, form_factor, x) for x in z.real.ravel()])
        out = out.reshape(z.shape)
        return out if out.ndim else complex(out)
    raise UnsupportedFormFactor("the point form factor has a divergent electromagnetic mass")


# ---------------------------------------------------------------------------
# Polarizabilities
# ---------------------------------------------------------------------------


def _check_pole(den_over_m, z, params: PhysicalParams):
    scale = np.maximum(params.omega0**2, np.abs(z) ** 2)
    bad = np.abs(den_over_m) <= POLE_RTOL * scale
    if np.any(bad):
        where = np.asarray(z)[bad].ravel()[0] if np.ndim(z) else complex(z)
        raise PoleEvaluation(f"response evaluated at a pole (zeta = {complex(where)!r})", complex(where))


def _finish(re, im, mass, shape_src):
    out = (re + 1j * im) / mass
    return out if np.ndim(shape_src) else complex(out)


def alpha_ald(params: PhysicalParams, zeta):
    """Point-electron polarizability 1/(M (omega0^2 - zeta^2 - i tau_e zeta^3))."""
    z = np.asarray(zeta)
    w0sq = params.omega0**2
    tau = params.tau_e
    if not np.iscomplexobj(z) or np.all(z.imag == 0):
        w = np.asarray(z.real, dtype=float)
        a = w0sq - w * w
        b = tau * (w * w * w)
        _check_pole(a - 1j * b, w, params)
        den = a * a + b * b
        return _finish(a / den, b / den, params.mass, zeta)
    z = z.astype(complex)
    den = (w0sq - z * z) - 1j * tau * (z * z * z)
    _check_pole(den, z, params)
    out = 1.0 / (params.mass * den)
    return out if out.ndim else complex(out)


def _require_critical(params: PhysicalParams):
    if not params.critical:
        raise WrongCutoff(
            "the closed-form finite-size polarizability requires the critical cutoff Omega = 1/tau_e"
        )


def alpha_fo(params: PhysicalParams, zeta):
    """Finite-size polarizability at the critical cutoff.

    Evaluated as 1/(M (omega0^2 - zeta^2/(1 - i zeta tau_e))), algebraically
    equal to (1 - i zeta tau_e)/(M (omega0^2 - zeta^2 - i gamma zeta)); on the
    real axis the imaginary part tau_e w^3/(1 + w^2 tau_e^2) is then free of
    cancellation.
    """
    _require_critical(params)
    z = np.asarray(zeta)
    w0sq = params.omega0**2
    tau = params.tau_e
    if not np.iscomplexobj(z) or np.all(z.imag == 0):
        w = np.asarray(z.real, dtype=float)
        q2 = (w * tau) ** 2
        a = w0sq - w * w / (1.0 + q2)
        b = tau * (w * w * w) / (1.0 + q2)
        _check_pole((a - 1j * b) * (1.0 - 1j * w * tau), w, params)
        den = a * a + b * b
        return _finish(a / den, b / den, params.mass, zeta)
    z = z.astype(complex)
    num = 1.0 - 1j * z * tau
    den = w0sq * num - z * z
    _check_pole(den, z, params)
    out = num / (params.mass * den)
    return out if out.ndim else complex(out)


def _mass_ratio(params: PhysicalParams, form_factor: FormFactor) -> float:
    """Bare-to-observed mass ratio m/M implied by the form factor."""
    if form_factor.kind == "point":
        return -math.inf
    if form_factor.kind == "lorentzian-cutoff":
        if form_factor.cutoff == params.cutoff:
            ratio = params.bare_mass / params.mass
        else:
            ratio = 1.0 - params.tau_e * form_factor.cutoff
    else:
        ratio = 1.0 - _tabulated_mass_shift(params, form_factor) / params.mass
    if ratio < 0:
        raise NegativeBareMass(f"form factor implies a negative bare mass (m/M = {ratio:.6g})")
    return ratio


def alpha_general(params: PhysicalParams, form_factor: FormFactor, zeta):
    """alpha = 1/(K - m zeta^2 - i zeta mu~(zeta)) for an arbitrary form factor.

    For the Lorentzian factor the inertial and drag terms are combined as
    M [mr zeta^2 + (1 - mr) zeta^2 / (1 - i zeta/Omega)], mr = m/M, which is
    the same expression rearranged.  The point factor is taken as the
    Omega -> infinity limit at fixed observed mass, which is the
    third-derivative model.
    """
    if form_factor.kind == "point":
        return alpha_ald(params, zeta)
    mr = _mass_ratio(params, form_factor)
    w0sq = params.omega0**2
    z = np.asarray(zeta)
    real_axis = not np.iscomplexobj(z) or np.all(z.imag == 0)

    if form_factor.kind == "tabulated":
        if not real_axis:
            raise UnsupportedFormFactor("tabulated form factors are evaluated on the real axis only")
        w = np.asarray(z.real, dtype=float)
        mu = np.asarray(mu_tilde_form_factor(params, form_factor, w))
        den = w0sq - mr * w * w - 1j * w * mu / params.mass
        _check_pole(den, w, params)
        out = 1.0 / (params.mass * den)
        return out if np.ndim(zeta) else complex(out)

    inv_cut = params.tau_e if (form_factor.cutoff == params.cutoff and params.critical) else 1.0 / form_factor.cutoff
    if real_axis:
        w = np.asarray(z.real, dtype=float)
        q = w * inv_cut
        lor = 1.0 / (1.0 + q * q)
        a = w0sq - w * w * (mr + (1.0 - mr) * lor)
        b = (1.0 - mr) * (w * w) * q * lor
        _check_pole((a - 1j * b) * (1.0 - 1j * q), w, params)
        den = a * a + b * b
        return _finish(a / den, b / den, params.mass, zeta)
    z = z.astype(complex)
    n = 1.0 - 1j * z * inv_cut
    den_poly = (w0sq - mr * z * z) * n - (1.0 - mr) * z * z
    _check_pole(den_poly, z, params)
    out = n / (params.mass * den_poly)
    return out if out.ndim else complex(out)


# ---------------------------------------------------------------------------
# Model record
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ResponseModel:
    """A polarizability model bundled with its parameters and form factor."""

    kind: str
    params: PhysicalParams
    form_factor: FormFactor

    def __post_init__(self):
        if self.kind not in ("ald", "fo", "general"):
            raise InvalidParameter(f"unknown model kind {self.kind!r}")
        if self.kind == "fo":
            _require_critical(self.params)
        if self.kind == "general":
            _mass_ratio(self.params, self.form_factor)

    @property
    def name(self) -> str:
        return self.kind

    def alpha(self, zeta):
        if self.kind == "ald":
            return alpha_ald(self.params, zeta)
        if self.kind == "fo":
            return alpha_fo(self.params, zeta)
        return alpha_general(self.params, self.form_factor, zeta)

    def form_factor_sq(self, omega):
        return self.form_factor.at_omega(omega, self.params.c)

    @property
    def kernel(self) -> Optional[MemoryKernel]:
        if self.kind == "ald" or self.form_factor.kind != "lorentzian-cutoff":
            return None
        return kernel_for(self.params, self.form_factor)


def ald_model(params: PhysicalParams) -> ResponseModel:
    return ResponseModel("ald", params, FormFactor.point())


def fo_model(params: PhysicalParams) -> ResponseModel:
    return ResponseModel("fo", params, FormFactor.lorentzian(params.cutoff))


def general_model(params: PhysicalParams, form_factor: FormFactor) -> ResponseModel:
    return ResponseModel("general", params, form_factor)


def make_model(name: str, params: PhysicalParams) -> ResponseModel:
    if name == "ald":
        return ald_model(params)
    if name == "fo":
        return fo_model(params)
    if name == "general":
        return general_model(params, FormFactor.lorentzian(params.cutoff))
    raise InvalidParameter(f"unknown model {name!r}")


# ---------------------------------------------------------------------------
# Applied force
# ---------------------------------------------------------------------------


def driving_force(params: PhysicalParams, form_factor: FormFactor, E0, k0, omega: float, t):
    """Force e f(k0) E0 exp(-i omega t) on the extended charge (dyn).

    Returns shape (3,) for scalar t, (len(t), 3) otherwise.
    """
    E0 = np.asarray(E0, dtype=complex)
    k0 = np.asarray(k0, dtype=float)
    kmag = float(np.linalg.norm(k0))
    if abs(kmag * params.c - abs(omega)) > 1e-9 * max(abs(omega), kmag * params.c, 1e-300):
        raise InconsistentWavevector(f"|k0| c = {kmag * params.c:.6g} but omega = {omega:.6g}")
    f = float(form_factor.amplitude(kmag, params.c))
    phase = np.exp(-1j * omega * np.asarray(t, dtype=float))
    return params.charge * f * np.multiply.outer(phase, E0)
