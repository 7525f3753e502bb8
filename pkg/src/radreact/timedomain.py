"""
Time-domain dynamics of the radiating oscillator.

Memory-kernel model
    With mu(t) = 2 w delta(t) - w Omega exp(-Omega t), w = M Omega^2 tau_e,
    the history integral is carried by one auxiliary velocity
        y(t) = Omega int_{-inf}^t exp(-Omega (t - s)) V(s) ds,
    so that the memory force is w (V - y) and
        R' = V,  m V' = F - K R - w (V - y),  y' = Omega (V - y).
    At the critical cutoff the bare mass m vanishes, V is eliminated and
        R' = y + (tau_e/M)(F - K R),  y' = (F - K R)/M,
    a non-stiff system whose time step is set by omega0 alone.

Point-charge model
    R''' = (R'' + omega0^2 R - F/M) / tau_e, integrated as a first-order
    system in (R, V, A).  Generic data run away at the positive root.

History before the first sample is quiescent (R = V = y = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import expm
from scipy.special import gammainc

from .causality import find_poles
from .errors import (
    GridMismatch,
    InvalidParameter,
    NonFiniteInput,
    StepTooLarge,
    TooShort,
    UnsupportedOmega0,
)
from .params import PhysicalParams
from .response import ald_model, lorentzian_kernel

FORCE_KINDS = ("step", "sinusoid", "impulse", "zero")
OVERFLOW_LIMIT = 1e300
RUNAWAY_THRESHOLD = 1e-3
RUNAWAY_R2 = 0.999
MIN_STEPS = 1000


@dataclass(frozen=True)
class ForceProfile:
    """External force on the oscillator.

    ``amplitude`` is F0 in dyn, or the momentum kick in dyn s for an impulse.
    """

    kind: str
    amplitude: float = 0.0
    omega: float = 0.0
    t_on: float = 0.0

    def __post_init__(self):
        if self.kind not in FORCE_KINDS:
            raise InvalidParameter(f"unknown force kind {self.kind!r}; expected one of {FORCE_KINDS}")
        for name in ("amplitude", "omega", "t_on"):
            if not math.isfinite(getattr(self, name)):
                raise NonFiniteInput(f"force {name} must be finite")
        if self.kind == "sinusoid" and not self.omega > 0:
            raise InvalidParameter("sinusoidal force needs omega > 0")

    @classmethod
    def step(cls, F0: float, t_on: float = 0.0) -> "ForceProfile":
        return cls("step", F0, 0.0, t_on)

    @classmethod
    def sinusoid(cls, F0: float, omega: float, t_on: float = 0.0) -> "ForceProfile":
        return cls("sinusoid", F0, omega, t_on)

    @classmethod
    def impulse(cls, P: float, t_on: float = 0.0) -> "ForceProfile":
        return cls("impulse", P, 0.0, t_on)

    @classmethod
    def zero(cls) -> "ForceProfile":
        return cls("zero")

    def active_value(self, t):
        """Smooth part of F(t) assuming the force is switched on (no delta)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "step":
            return np.full_like(t, self.amplitude)
        if self.kind == "sinusoid":
            return self.amplitude * np.sin(self.omega * (t - self.t_on))
        return np.zeros_like(t)

    def value(self, t):
        """Smooth part of F(t): zero before onset."""
        t = np.asarray(t, dtype=float)
        return np.where(t >= self.t_on, self.active_value(t), 0.0)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    R: np.ndarray
    V: np.ndarray
    aux: np.ndarray
    aux_name: str
    model: str
    dt: float
    params: PhysicalParams
    time_unit: float
    truncated: bool = False
    force: Optional[ForceProfile] = None

    def __post_init__(self):
        n = len(self.times)
        if not (len(self.R) == len(self.V) == len(self.aux) == n):
            raise GridMismatch("trajectory arrays must have equal length")
        if self.aux_name not in ("y", "A"):
            raise InvalidParameter("aux_name must be 'y' or 'A'")
        if not self.dt > 0:
            raise InvalidParameter("dt must be positive")

    @property
    def y(self) -> np.ndarray:
        if self.aux_name != "y":
            raise AttributeError("point-charge trajectories carry A, not y")
        return self.aux

    @property
    def A(self) -> np.ndarray:
        if self.aux_name != "A":
            raise AttributeError("memory-kernel trajectories carry y, not A")
        return self.aux

    def __len__(self):
        return len(self.times)


# ---------------------------------------------------------------------------
# Linear stepping
# ---------------------------------------------------------------------------


def _rk4_operators(A: np.ndarray, b: np.ndarray, h: float):
    """RK4 for u' = A u + b F(t), written as u+ = P u + c1 F(t) + cm F(t+h/2) + c4 F(t+h)."""
    n = A.shape[0]

    def step(u, g1, gm, g4):
        k1 = A @ u + g1
        k2 = A @ (u + 0.5 * h * k1) + gm
        k3 = A @ (u + 0.5 * h * k2) + gm
        k4 = A @ (u + h * k3) + g4
        return u + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    zero = np.zeros(n)
    P = np.column_stack([step(e, zero, zero, zero) for e in np.eye(n)])
    return P, step(zero, b, zero, zero), step(zero, zero, b, zero), step(zero, zero, zero, b)


def _time_grid(t_start: float, t_end: float, dt: float) -> np.ndarray:
    if not (dt > 0 and math.isfinite(dt)):
        raise InvalidParameter(f"dt must be positive and finite, got {dt!r}")
    if not t_end > t_start:
        raise InvalidParameter("t_end must exceed the start time")
    n = int(math.ceil((t_end - t_start) / dt - 1e-9))
    return t_start + dt * np.arange(n + 1)


def _forcing_samples(force: ForceProfile, times: np.ndarray, dt: float):
    """F at the three RK4 nodes of each step; the switch-on is decided at the step start."""
    t0 = times[:-1]
    on = t0 >= force.t_on - 1e-9 * dt
    f1 = np.where(on, force.active_value(t0), 0.0)
    fm = np.where(on, force.active_value(t0 + 0.5 * dt), 0.0)
    f4 = np.where(on, force.active_value(t0 + dt), 0.0)
    return f1, fm, f4, on


def _impulse_index(force: ForceProfile, times: np.ndarray, dt: float) -> Optional[int]:
    if force.kind != "impulse":
        return None
    idx = int(np.searchsorted(times, force.t_on - 1e-9 * dt))
    return idx if idx < len(times) else None


def _run_linear(P, c1, cm, c4, u0, f1, fm, f4, kick_index=None, kick=None, overflow=False):
    n = f1.size
    out = np.empty((n + 1, u0.size))
    u = np.array(u0, dtype=float)
    if kick_index == 0:
        u = u + kick
    out[0] = u
    last = n
    for i in range(n):
        u = P @ u + c1 * f1[i] + cm * fm[i] + c4 * f4[i]
        if kick_index == i + 1:
            u = u + kick
        out[i + 1] = u
        if overflow and not (np.max(np.abs(u)) <= OVERFLOW_LIMIT):
            last = i
            break
    return out[: last + 1], last < n


# ---------------------------------------------------------------------------
# Memory-kernel dynamics
# ---------------------------------------------------------------------------


def _fo_time_unit(params: PhysicalParams) -> float:
    return 1.0 / params.omega0 if params.omega0 > 0 else params.tau_e


def _check_fo_step(params: PhysicalParams, force: ForceProfile, dt: float):
    # the cutoff-rate mode of the non-critical system is propagated exactly
    rates = [params.omega0, params.gamma, force.omega]
    fastest = max(rates)
    if fastest > 0 and dt > 0.01 / fastest * (1 + 1e-12):
        raise StepTooLarge(f"dt = {dt:.3g} s exceeds 0.01/{fastest:.3g} s")


def integrate_fo(
    params: PhysicalParams,
    force: ForceProfile,
    t_end: float,
    dt: float,
    R0: float = 0.0,
    V0: float = 0.0,
    y0: Optional[float] = None,
    t_start: float = 0.0,
) -> Trajectory:
    """Integrate the memory-kernel equation of motion.

    At the critical cutoff the reduced (R, y) system is stepped with classical
    RK4 (global order 4).  Below it the stiff (R, V, y) system, with the
    forcing appended as extra linear states, is advanced by its exact matrix
    exponential.  ``y0`` defaults to the value consistent with V0 at the
    critical cutoff and to V0 otherwise.
    """
    _check_fo_step(params, force, dt)
    times = _time_grid(t_start, t_end, dt)
    if params.critical:
        return _integrate_fo_critical(params, force, times, dt, R0, V0, y0)
    return _integrate_fo_general(params, force, times, dt, R0, V0, y0)


def _integrate_fo_critical(params, force, times, dt, R0, V0, y0):
    M, K, tau = params.mass, params.spring_K, params.tau_e
    F_start = float(force.value(times[0]))
    if y0 is None:
        y0 = V0 - tau / M * (F_start - K * R0)
    A = np.array([[-tau * K / M, 1.0], [-K / M, 0.0]])
    b = np.array([tau / M, 1.0 / M])
    P, c1, cm, c4 = _rk4_operators(A, b, dt)
    f1, fm, f4, _ = _forcing_samples(force, times, dt)
    kick = np.array([tau * force.amplitude / M, force.amplitude / M])
    states, _ = _run_linear(P, c1, cm, c4, np.array([R0, y0]), f1, fm, f4,
                            _impulse_index(force, times, dt), kick)
    R, y = states[:, 0], states[:, 1]
    F = force.value(times)
    V = y + tau / M * (F - K * R)
    return Trajectory(times, R, V, y, "y", "fo", dt, params, _fo_time_unit(params), force=force)


def _integrate_fo_general(params, force, times, dt, R0, V0, y0):
    M, K = params.mass, params.spring_K
    kernel = lorentzian_kernel(params)
    w, Om = kernel.instantaneous_weight, params.cutoff
    m = params.bare_mass
    y0 = V0 if y0 is None else y0
    # states: R, V, y, then forcing states (constant; or sin, cos)
    G = np.zeros((5, 5))
    G[0, 1] = 1.0
    G[1, 0], G[1, 1], G[1, 2] = -K / m, -w / m, w / m
    G[2, 1], G[2, 2] = Om, -Om
    if force.kind == "step":
        G[1, 3] = 1.0 / m
    elif force.kind == "sinusoid":
        G[1, 3] = 1.0 / m
        G[3, 4], G[4, 3] = force.omega, -force.omega
    E = expm(G * dt)
    n = times.size
    out = np.empty((n, 3))
    u = np.array([R0, V0, y0, 0.0, 0.0])
    on = False
    for i in range(n):
        if not on and times[i] >= force.t_on - 1e-9 * dt:
            on = True
            if force.kind == "step":
                u[3] = force.amplitude
            elif force.kind == "sinusoid":
                phase = force.omega * (times[i] - force.t_on)
                u[3], u[4] = force.amplitude * math.sin(phase), force.amplitude * math.cos(phase)
            elif force.kind == "impulse":
                u[1] += force.amplitude / m
        out[i] = u[:3]
        u = E @ u
    return Trajectory(times, out[:, 0], out[:, 1], out[:, 2], "y", "fo", dt, params,
                      _fo_time_unit(params), force=force)


def memory_force(trajectory: Trajectory) -> np.ndarray:
    """w (V - y): the history force carried by the auxiliary state."""
    if trajectory.aux_name != "y":
        raise InvalidParameter("memory force needs a memory-kernel trajectory")
    w = lorentzian_kernel(trajectory.params).instantaneous_weight
    return w * (trajectory.V - trajectory.y)


# ---------------------------------------------------------------------------
# Point-charge dynamics
# ---------------------------------------------------------------------------


def ald_time_unit(params: PhysicalParams) -> float:
    if params.omega0 * params.tau_e < 1e-3:
        return params.tau_e
    return 1.0 / params.omega0


def unstable_root(params: PhysicalParams) -> float:
    """Positive real growth rate s of the point-charge characteristic cubic."""
    ups = [p.location for p in find_poles(ald_model(params)).poles if p.location.imag > 0]
    return float(max(ups, key=lambda z: z.imag).imag)


def stable_manifold_acceleration(params: PhysicalParams, R0: float = 0.0, V0: float = 0.0) -> float:
    """A0 that removes the runaway mode, from the left eigenvector of the unstable root."""
    lam = unstable_root(params)
    tau, w0sq = params.tau_e, params.omega0**2
    l0 = w0sq / (tau * lam)
    l1 = l0 / lam
    return -(l0 * R0 + l1 * V0)


def integrate_ald(
    params: PhysicalParams,
    force: ForceProfile,
    t_end: float,
    dt: float,
    A0: float = 0.0,
    R0: float = 0.0,
    V0: float = 0.0,
    t_start: float = 0.0,
    time_unit: Optional[float] = None,
) -> Trajectory:
    """RK4 for the third-order point-charge equation (order 4, fixed step).

    Requires dt <= 0.1 tau_e.  When the state exceeds 1e300 the run stops
    and the trajectory is returned with ``truncated=True``.
    """
    tau = params.tau_e
    if dt > 0.1 * tau * (1 + 1e-12):
        raise StepTooLarge(f"dt = {dt:.3g} s exceeds 0.1 tau_e = {0.1 * tau:.3g} s")
    times = _time_grid(t_start, t_end, dt)
    M, w0sq = params.mass, params.omega0**2
    A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [w0sq / tau, 0.0, 1.0 / tau]])
    b = np.array([0.0, 0.0, -1.0 / (M * tau)])
    P, c1, cm, c4 = _rk4_operators(A, b, dt)
    f1, fm, f4, _ = _forcing_samples(force, times, dt)
    # an impulse P delta(t) enters through R''' and so jumps A by -P/(M tau)
    kick = np.array([0.0, 0.0, -force.amplitude / (M * tau)])
    states, truncated = _run_linear(P, c1, cm, c4, np.array([R0, V0, A0]), f1, fm, f4,
                                    _impulse_index(force, times, dt), kick, overflow=True)
    n = states.shape[0]
    unit = ald_time_unit(params) if time_unit is None else time_unit
    return Trajectory(times[:n], states[:, 0], states[:, 1], states[:, 2], "A", "ald", dt, params,
                      unit, truncated, force)


def ald_nonrunaway_response(params: PhysicalParams, force: ForceProfile, t_grid) -> Trajectory:
    """Runaway-free free-particle solution A(t) = (1/(M tau)) int_t^inf e^{-(s-t)/tau} F(s) ds.

    Closed forms for each force kind; R and V follow by integrating from a
    quiescent far past.  The response starts before the force (preacceleration).
    """
    if params.omega0 != 0:
        raise UnsupportedOmega0("the runaway-free branch is implemented for omega0 = 0 only")
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise GridMismatch("t_grid must be a 1-D array of at least two times")
    steps = np.diff(t)
    dt = float(steps[0])
    if not np.allclose(steps, dt, rtol=1e-9, atol=0):
        raise GridMismatch("t_grid must be uniform")
    M, tau = params.mass, params.tau_e
    u = t - force.t_on
    before = u < 0
    ub = np.where(before, u, 0.0)
    ua = np.where(before, 0.0, u)
    grow = np.exp(ub / tau)
    F0 = force.amplitude
    if force.kind == "zero":
        A = V = R = np.zeros_like(t)
    elif force.kind == "step":
        a = F0 / M
        A = np.where(before, a * grow, a)
        V = np.where(before, a * tau * grow, a * (tau + ua))
        R = np.where(before, a * tau**2 * grow, a * (tau**2 + tau * ua + 0.5 * ua**2))
    elif force.kind == "impulse":
        a = F0 / (M * tau)
        A = np.where(before, a * grow, 0.0)
        V = np.where(before, a * tau * grow, F0 / M)
        R = np.where(before, a * tau**2 * grow, F0 / M * (tau + ua))
    else:
        om = force.omega
        chi = 1.0 / (1.0 - 1j * om * tau)
        a = F0 / M
        a_on = a * chi.imag
        e = np.exp(1j * om * ua)
        A = np.where(before, a_on * grow, a * (chi * e).imag)
        V = np.where(before, a_on * tau * grow, a_on * tau + a * (chi * (e - 1) / (1j * om)).imag)
        R = np.where(
            before,
            a_on * tau**2 * grow,
            a_on * tau**2 + a_on * tau * ua + a * (chi * ((e - 1) / (1j * om) ** 2 - ua / (1j * om))).imag,
        )
    return Trajectory(t, np.asarray(R, float), np.asarray(V, float), np.asarray(A, float), "A",
                      "ald-nonrunaway", dt, params, tau, force=force)


# ---------------------------------------------------------------------------
# Convolution oracle
# ---------------------------------------------------------------------------


def _exp_moments(r: float, h, order: int = 3) -> np.ndarray:
    """int_0^h exp(-r u) u^k du for k = 0..order; shape (order + 1, len(h))."""
    k = np.arange(order + 1)[:, None]
    fact = np.array([math.factorial(j) for j in range(order + 1)], dtype=float)[:, None]
    return fact / r ** (k + 1) * gammainc(k + 1, r * np.atleast_1d(h)[None, :])


def convolution_oracle(params: PhysicalParams, times, V, t: float) -> float:
    """Memory force int_{t0}^t mu(t - s) V(s) ds by direct product quadrature.

    V is interpolated with a cubic spline; each spline piece is integrated
    exactly against the exponential kernel, and the endpoint delta adds w V(t).
    The history before ``times[0]`` is taken as quiescent.
    """
    times = np.asarray(times, dtype=float)
    V = np.asarray(V, dtype=float)
    if times.shape != V.shape or times.ndim != 1:
        raise GridMismatch("times and V must be 1-D arrays of equal length")
    if not (times[0] <= t <= times[-1] * (1 + 1e-12) + 1e-300):
        raise GridMismatch(f"t = {t!r} lies outside the sampled interval")
    k = int(np.argmin(np.abs(times - t)))
    if not math.isclose(times[k], t, rel_tol=1e-9, abs_tol=1e-9 * (times[1] - times[0])):
        raise GridMismatch("t must be a sample time of the trajectory")
    kernel = lorentzian_kernel(params)
    w = kernel.instantaneous_weight
    if k == 0:
        return w * float(V[0])
    tk = times[: k + 1]
    spline = CubicSpline(tk, V[: k + 1]) if k >= 2 else None
    h = np.diff(tk)
    right = tk[1:]
    if spline is None:
        d = np.array([V[1:k + 1], -(V[1:k + 1] - V[:k]) / h, np.zeros(k), np.zeros(k)])
    else:
        # Taylor coefficients of V(right - u) in u
        d = np.array([
            spline(right),
            -spline(right, 1),
            spline(right, 2) / 2.0,
            -spline(right, 3) / 6.0,
        ])
    total = w * float(V[k])
    for amp, rate in kernel.exponential_terms:
        decay = np.exp(-rate * (tk[k] - right))
        moments = _exp_moments(rate, h)
        total += amp * float(np.sum(decay * np.sum(moments * d, axis=0)))
    return total


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StabilityVerdict:
    runaway: bool
    growth_rate: float
    matched_root: Optional[complex] = None
    r_squared: float = 0.0

    def as_dict(self) -> dict:
        return {
            "runaway": self.runaway,
            "growth_rate": self.growth_rate,
            "matched_root": None if self.matched_root is None
            else {"re": self.matched_root.real, "im": self.matched_root.imag},
            "r_squared": self.r_squared,
        }


def _magnitude(trajectory: Trajectory) -> np.ndarray:
    T = trajectory.time_unit
    power = 1 if trajectory.aux_name == "y" else 2
    return np.maximum.reduce([
        np.abs(trajectory.R), np.abs(trajectory.V) * T, np.abs(trajectory.aux) * T**power,
    ])


def stability_verdict(trajectory: Trajectory, threshold: float = RUNAWAY_THRESHOLD) -> StabilityVerdict:
    """Runaway test: log-slope of the state magnitude over the final third.

    runaway iff slope > threshold / time_unit with R^2 > 0.999.  When runaway,
    the slope is matched against the unstable characteristic root within 1%.
    """
    n = len(trajectory)
    if n - 1 < MIN_STEPS:
        raise TooShort(f"need at least {MIN_STEPS} steps, got {n - 1}")
    T = trajectory.time_unit
    mag = _magnitude(trajectory)[2 * n // 3:]
    t = trajectory.times[2 * n // 3:]
    keep = mag > 0
    if np.count_nonzero(keep) < 10:
        return StabilityVerdict(False, 0.0)
    x = t[keep] / T
    ylog = np.log(mag[keep])
    slope, icpt = np.polyfit(x, ylog, 1)
    resid = ylog - (slope * x + icpt)
    sst = float(np.sum((ylog - ylog.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / sst if sst > 0 else 0.0
    rate = float(slope / T)
    runaway = bool(slope > threshold and r2 > RUNAWAY_R2)
    matched = None
    if runaway:
        model = ald_model(trajectory.params) if trajectory.model.startswith("ald") else None
        if model is not None:
            for p in find_poles(model).poles:
                s = -1j * p.location
                if s.real > 0 and abs(rate - s.real) <= 0.01 * abs(s):
                    matched = complex(s)
    return StabilityVerdict(runaway, rate, matched, r2)


def steady_state_amplitude(trajectory: Trajectory, omega: float, periods: int = 20) -> complex:
    """Complex C with R(t) ~ Re[C exp(-i omega (t - t_on))], fitted over the last whole periods."""
    t_on = trajectory.force.t_on if trajectory.force is not None else 0.0
    span = periods * 2 * math.pi / omega
    sel = trajectory.times >= trajectory.times[-1] - span
    u = trajectory.times[sel] - t_on
    basis = np.column_stack([np.cos(omega * u), np.sin(omega * u)])
    (a, b), *_ = np.linalg.lstsq(basis, trajectory.R[sel], rcond=None)
    return complex(a, b)


def energy_decay_rate(trajectory: Trajectory) -> float:
    """-d ln E/dt for E = K R^2/2 + M V^2/2, fitted over the whole run."""
    p = trajectory.params
    E = 0.5 * p.spring_K * trajectory.R**2 + 0.5 * p.mass * trajectory.V**2
    slope, _ = np.polyfit(trajectory.times - trajectory.times[0], np.log(E), 1)
    return float(-slope)
