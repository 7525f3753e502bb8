import math

import numpy as np
import pytest
from scipy.linalg import expm

from radreact.errors import GridMismatch, InvalidParameter, StepTooLarge, TooShort, UnsupportedOmega0
from radreact.response import FormFactor, alpha_fo, alpha_general, lorentzian_kernel, mu_tilde
from radreact.timedomain import (
    ForceProfile,
    Trajectory,
    ald_nonrunaway_response,
    convolution_oracle,
    energy_decay_rate,
    integrate_ald,
    integrate_fo,
    memory_force,
    stability_verdict,
    stable_manifold_acceleration,
    steady_state_amplitude,
    unstable_root,
)


def test_force_profile_validation():
    with pytest.raises(InvalidParameter):
        ForceProfile("ramp")
    with pytest.raises(InvalidParameter):
        ForceProfile.sinusoid(1.0, 0.0)
    with pytest.raises(InvalidParameter):
        ForceProfile.step(math.inf)
    f = ForceProfile.step(2.0, t_on=1.0)
    assert list(f.value([0.5, 1.0, 2.0])) == [0.0, 2.0, 2.0]


def test_trajectory_invariants(electron):
    t = np.arange(3.0)
    with pytest.raises(GridMismatch):
        Trajectory(t, t, t, t[:2], "y", "fo", 1.0, electron, 1.0)
    tr = Trajectory(t, t, t, t, "y", "fo", 1.0, electron, 1.0)
    with pytest.raises(AttributeError):
        tr.A


def test_fo_step_too_large(electron):
    with pytest.raises(StepTooLarge):
        integrate_fo(electron, ForceProfile.step(1.0), 1e-13, 0.1 / electron.omega0)


def test_fo_step_response_and_causality(toy):
    F0, t_on = 1e-3, 5.0 / toy.omega0
    tr = integrate_fo(toy, ForceProfile.step(F0, t_on), 800 / toy.omega0, 0.01 / toy.omega0)
    assert tr.R[-1] == pytest.approx(F0 / toy.spring_K, rel=1e-6)
    assert np.max(np.abs(tr.R[tr.times < t_on])) <= 1e-12 * F0 / toy.spring_K
    assert not stability_verdict(tr).runaway


def test_fo_step_causality_electron(electron):
    w0 = electron.omega0
    F0, t_on = 1e-3, 5.0 / w0
    tr = integrate_fo(electron, ForceProfile.step(F0, t_on), 50 / w0, 0.01 / w0)
    assert np.max(np.abs(tr.R[tr.times < t_on])) <= 1e-12 * F0 / electron.spring_K
    assert np.max(np.abs(tr.R)) <= 2.01 * F0 / electron.spring_K


@pytest.mark.parametrize("ratio", [0.5, 1.0, 2.0])
def test_fo_sinusoidal_steady_state(toy, ratio):
    om = ratio * toy.omega0
    F0 = 1e-3
    dt = 0.01 / max(toy.omega0, om)
    tr = integrate_fo(toy, ForceProfile.sinusoid(F0, om), 80 / toy.gamma + 40 * math.pi / om, dt)
    C = steady_state_amplitude(tr, om)
    a = complex(alpha_fo(toy, om))
    assert abs(C) / (abs(a) * F0) == pytest.approx(1.0, abs=1e-3)
    expected_phase = np.angle(1j * a)
    assert abs(np.angle(C) - expected_phase) <= 1e-3 * abs(expected_phase)


def test_fo_frequency_spread(toy):
    """Ten drive frequencies across [0.1, 10] omega0, complex amplitude within 0.1%."""
    F0 = 1e-3
    for om in np.geomspace(0.1, 10.0, 10) * toy.omega0:
        dt = 0.01 / max(toy.omega0, om)
        tr = integrate_fo(toy, ForceProfile.sinusoid(F0, om), 80 / toy.gamma + 40 * math.pi / om, dt)
        expected = 1j * complex(alpha_fo(toy, om)) * F0
        assert abs(steady_state_amplitude(tr, om) - expected) <= 1e-3 * abs(expected)


def test_fo_free_decay_eigenvalues(toy):
    """Zero force, nonzero y: decays, at the rate of the pole imaginary part."""
    w0 = toy.omega0
    tr = integrate_fo(toy, ForceProfile.zero(), 200 / w0, 0.01 / w0, y0=1.0)
    env_early = np.max(np.abs(tr.R[: len(tr) // 10]))
    env_late = np.max(np.abs(tr.R[-len(tr) // 10:]))
    assert env_late < env_early
    v = stability_verdict(tr)
    assert not v.runaway and v.growth_rate < 0


def test_fo_energy_decay_rate(electron):
    w0 = electron.omega0
    tr = integrate_fo(electron, ForceProfile.zero(), 20 * math.pi / w0, 0.002 / w0, R0=1e-8)
    assert energy_decay_rate(tr) == pytest.approx(electron.gamma, rel=1e-2)


def test_fo_rk4_order(toy):
    """Free oscillation against the exact propagator; halving dt cuts the error ~16x."""
    w0, R0 = toy.omega0, 1e-8
    M, K, tau = toy.mass, toy.spring_K, toy.tau_e
    T = 20 / w0
    G = np.array([[-tau * K / M, 1.0], [-K / M, 0.0]])
    ref = expm(G * T) @ np.array([R0, tau * K * R0 / M])
    errs = []
    for dt in (0.01 / w0, 0.005 / w0, 0.0025 / w0):
        tr = integrate_fo(toy, ForceProfile.zero(), T, dt, R0=R0)
        errs.append(abs(tr.R[-1] - ref[0]) / R0)
    for a, b in zip(errs, errs[1:]):
        assert 14.0 <= a / b <= 18.0


def test_fo_convolution_oracle(toy):
    w0 = toy.omega0
    tr = integrate_fo(toy, ForceProfile.sinusoid(1e-3, w0), 30 / w0, 0.01 / w0)
    mf = memory_force(tr)
    scale = np.max(np.abs(mf))
    idx = range(11, len(tr), 37)
    err = max(abs(convolution_oracle(toy, tr.times, tr.V, tr.times[i]) - mf[i]) for i in idx)
    assert err / scale <= 1e-6
    assert convolution_oracle(toy, tr.times, np.zeros_like(tr.V), tr.times[-1]) == 0.0
    with pytest.raises(GridMismatch):
        convolution_oracle(toy, tr.times, tr.V, tr.times[-1] * 2)


def test_convolution_oracle_constant_velocity(toy):
    """Constant V from t = 0: memory force w V exp(-Omega t), which vanishes for long times."""
    om = toy.cutoff
    t = np.linspace(0, 40 / om, 4001)
    V = np.full_like(t, 3.0)
    w = lorentzian_kernel(toy).instantaneous_weight
    for i in (10, 1000, 4000):
        assert convolution_oracle(toy, t, V, t[i]) == pytest.approx(w * 3.0 * math.exp(-om * t[i]), rel=1e-9, abs=1e-12 * w)


def test_convolution_oracle_phasor(toy):
    """Steady sinusoidal V: the memory force approaches Re[mu~(w) V~ e^{-i w t}]."""
    w = toy.omega0
    t = np.linspace(0, 400 / w, 40001)
    V = np.cos(w * t)
    mu = complex(mu_tilde(lorentzian_kernel(toy), w))
    for i in (30000, 40000):
        expected = (mu * np.exp(-1j * w * t[i])).real
        assert convolution_oracle(toy, t, V, t[i]) == pytest.approx(expected, rel=1e-6, abs=1e-6 * abs(mu))


def test_general_cutoff_integration(toy):
    p = toy.replace(cutoff=0.5 / toy.tau_e)
    om = p.omega0
    tr = integrate_fo(p, ForceProfile.sinusoid(1e-3, om), 1500 / om, 0.01 / om)
    C = steady_state_amplitude(tr, om)
    expected = 1j * complex(alpha_general(p, FormFactor.lorentzian(p.cutoff), om)) * 1e-3
    assert abs(C - expected) / abs(expected) <= 1e-3
    mf = memory_force(tr)
    err = max(abs(convolution_oracle(p, tr.times[:3000], tr.V[:3000], tr.times[i]) - mf[i]) for i in range(11, 3000, 97))
    assert err / np.max(np.abs(mf[:3000])) <= 1e-6


def test_ald_free_runaway(electron):
    p = electron.replace(omega0=0.0)
    tau = p.tau_e
    tr = integrate_ald(p, ForceProfile.zero(), 30 * tau, 0.01 * tau, A0=1.0)
    assert tr.A[-1] == pytest.approx(math.exp(tr.times[-1] / tau), rel=1e-6)
    v = stability_verdict(tr)
    assert v.runaway
    assert v.growth_rate * tau == pytest.approx(1.0, rel=1e-2)
    assert v.matched_root == pytest.approx(1 / tau, rel=1e-12)


def test_ald_bound_runaway(electron):
    tau = electron.tau_e
    tr = integrate_ald(electron, ForceProfile.zero(), 30 * tau, 0.01 * tau, A0=1.0)
    v = stability_verdict(tr)
    assert v.runaway
    assert v.growth_rate == pytest.approx(unstable_root(electron), rel=1e-2)
    assert v.matched_root is not None


def test_ald_stable_manifold(electron):
    tau, R0 = electron.tau_e, 1e-8
    A0 = stable_manifold_acceleration(electron, R0=R0)
    assert A0 == pytest.approx(-electron.omega0**2 * R0, rel=1e-6)
    tr = integrate_ald(electron, ForceProfile.zero(), 30 * tau, 0.01 * tau, A0=A0, R0=R0)
    assert np.max(np.abs(tr.A)) <= abs(A0) * (1 + 1e-6)
    assert not stability_verdict(tr).runaway


def test_ald_overflow_truncates(electron):
    p = electron.replace(omega0=0.0)
    tr = integrate_ald(p, ForceProfile.zero(), 1e4 * p.tau_e, 0.1 * p.tau_e, A0=1.0)
    assert tr.truncated and np.all(np.isfinite(tr.A))


def test_ald_step_limit(electron):
    with pytest.raises(StepTooLarge):
        integrate_ald(electron, ForceProfile.zero(), 1e-22, 0.2 * electron.tau_e)


def test_nonrunaway_preacceleration(electron):
    p = electron.replace(omega0=0.0)
    tau, M, F0 = p.tau_e, p.mass, 2.0
    t = np.linspace(-5 * tau, 5 * tau, 10001)
    tr = ald_nonrunaway_response(p, ForceProfile.step(F0, 0.0), t)
    i = int(np.argmin(np.abs(t + tau)))
    assert tr.A[i] == pytest.approx(F0 / M / math.e, rel=1e-9)
    j = int(np.searchsorted(t, 0.0))
    assert tr.A[i] / tr.A[j] == pytest.approx(math.exp(-1), rel=1e-9)
    assert tr.A[-1] == pytest.approx(F0 / M, rel=1e-15)
    zero = ald_nonrunaway_response(p, ForceProfile.zero(), t)
    assert not np.any(zero.A)


@pytest.mark.parametrize(
    "force",
    [ForceProfile.step(2.0, 0.0), ForceProfile.sinusoid(2.0, 3e22, 0.0), ForceProfile.impulse(1e-23, 0.0)],
)
def test_nonrunaway_satisfies_equation(electron, force):
    """A' = (A - F/M)/tau and V' = A away from the onset, by central differences."""
    p = electron.replace(omega0=0.0)
    tau, M = p.tau_e, p.mass
    h = 1e-4 * tau
    for t0 in (-3 * tau, -0.5 * tau, 0.7 * tau, 4 * tau):
        t = np.array([t0 - h, t0, t0 + h])
        tr = ald_nonrunaway_response(p, force, t)
        dA = (tr.A[2] - tr.A[0]) / (2 * h)
        rhs = (tr.A[1] - float(force.value(t0)) / M) / tau
        scale = max(abs(rhs), abs(tr.A[1]) / tau, 1e-300)
        assert abs(dA - rhs) <= 1e-8 * scale
        dV = (tr.V[2] - tr.V[0]) / (2 * h)
        assert abs(dV - tr.A[1]) <= 1e-8 * max(abs(tr.A).max(), 1e-300)


def test_nonrunaway_requires_free_particle(electron):
    with pytest.raises(UnsupportedOmega0):
        ald_nonrunaway_response(electron, ForceProfile.zero(), np.linspace(0, 1e-22, 10))


def test_verdict_short_and_zero(electron):
    w0 = electron.omega0
    short = integrate_fo(electron, ForceProfile.zero(), 100 * 0.01 / w0, 0.01 / w0)
    with pytest.raises(TooShort):
        stability_verdict(short)
    zero = integrate_fo(electron, ForceProfile.zero(), 2000 * 0.01 / w0, 0.01 / w0)
    v = stability_verdict(zero)
    assert not v.runaway and v.growth_rate == 0.0


def test_impulse_fo_momentum(toy):
    P = 1e-20
    tr = integrate_fo(toy, ForceProfile.impulse(P, 0.0), 0.5 / toy.omega0, 0.001 / toy.omega0)
    assert tr.y[0] == pytest.approx(P / toy.mass, rel=1e-15)
    assert tr.R[0] == pytest.approx(toy.tau_e * P / toy.mass, rel=1e-15)
