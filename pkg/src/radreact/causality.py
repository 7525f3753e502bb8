"""
Causality diagnostics: denominator poles, the crossing relation, and a
numerical Kramers-Kronig reconstruction of Re alpha from Im alpha.

A causal response is analytic in the upper half of the complex frequency
plane, i.e. every pole has Im < 0.  Using the crossing symmetry
alpha(-w) = alpha(w)* the dispersion relation folds onto w' > 0:

    Re alpha(w) = (2/pi) P int_0^inf w' Im alpha(w') / (w'^2 - w^2) dw'
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import BandNotCovered, InsufficientResolution, NonRationalModel
from .params import FrequencyGrid
from .response import ResponseModel, _mass_ratio

REAL_AXIS_RTOL = 1e-12
MIN_DECADES = 5.0
MIN_POINTS_PER_DECADE = 200.0


# ---------------------------------------------------------------------------
# Rational form of the models
# ---------------------------------------------------------------------------


def rational_form(model: ResponseModel) -> Tuple[np.ndarray, np.ndarray]:
    """(numerator, denominator) coefficients in omega, highest power first.

    alpha(omega) = polyval(num, omega) / polyval(den, omega).
    """
    p = model.params
    M, w0sq, tau = p.mass, p.omega0**2, p.tau_e
    kind = model.kind
    ff = model.form_factor
    if kind == "general" and ff.kind == "point":
        kind = "ald"
    if kind == "ald":
        return np.array([1.0 + 0j]), M * np.array([-1j * tau, -1.0, 0.0, w0sq])
    if kind == "fo":
        return np.array([-1j * tau, 1.0]), M * np.array([-1.0, -1j * w0sq * tau, w0sq])
    if ff.kind != "lorentzian-cutoff":
        raise NonRationalModel(f"form factor {ff.kind!r} does not give a rational polarizability")
    mr = _mass_ratio(p, ff)
    inv = 1.0 / ff.cutoff
    num = np.array([-1j * inv, 1.0])
    den = M * np.array([1j * mr * inv, -1.0, -1j * w0sq * inv, w0sq])
    if mr == 0:
        den = den[1:]
    return num, den


# ---------------------------------------------------------------------------
# Poles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pole:
    location: complex
    residue: Optional[complex]
    half_plane: str
    backward_error: float


@dataclass(frozen=True)
class PoleSet:
    model: str
    poles: Tuple[Pole, ...]
    causal: bool
    zeros: Tuple[complex, ...] = ()

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "roots": [
                {
                    "re": p.location.real,
                    "im": p.location.imag,
                    "residue_re": None if p.residue is None else p.residue.real,
                    "residue_im": None if p.residue is None else p.residue.imag,
                    "half_plane": p.half_plane,
                    "backward_error": p.backward_error,
                }
                for p in self.poles
            ],
            "zeros": [{"re": z.real, "im": z.imag} for z in self.zeros],
            "causal": self.causal,
        }


def _polish(coeffs: np.ndarray, root: complex, iters: int = 8) -> complex:
    """Newton steps on the polynomial, kept only while |p| decreases."""
    d = np.polyder(coeffs)
    best = root
    best_val = abs(np.polyval(coeffs, root))
    x = root
    for _ in range(iters):
        dp = np.polyval(d, x)
        if dp == 0 or best_val == 0:
            break
        x = x - np.polyval(coeffs, x) / dp
        val = abs(np.polyval(coeffs, x))
        if val < best_val:
            best, best_val = x, val
        else:
            break
    return complex(best)


def _symmetrize(roots):
    """Enforce the crossing pairing  r <-> -conj(r)  exactly."""
    roots = list(roots)
    out = []
    used = [False] * len(roots)
    for i, r in enumerate(roots):
        if used[i]:
            continue
        used[i] = True
        target = -np.conj(r)
        # a root on the imaginary axis is its own partner
        best_j, best_d = None, abs(r.real) * 2
        for j in range(len(roots)):
            if not used[j] and abs(roots[j] - target) < best_d:
                best_j, best_d = j, abs(roots[j] - target)
        if best_j is None:
            out.append(complex(0.0, r.imag))
        else:
            used[best_j] = True
            q = roots[best_j]
            mean = 0.5 * (r - np.conj(q))
            out.extend([complex(mean), complex(-np.conj(mean))])
    return out


def _backward_error(coeffs, x) -> float:
    mags = np.abs(coeffs)
    powers = np.abs(x) ** np.arange(len(coeffs) - 1, -1, -1)
    scale = float(np.sum(mags * powers))
    return 0.0 if scale == 0 else float(abs(np.polyval(coeffs, x)) / scale)


def _classify(z: complex, rtol: float) -> str:
    if abs(z.imag) <= rtol * abs(z):
        return "real-axis"
    return "upper" if z.imag > 0 else "lower"


def find_poles(model: ResponseModel, real_axis_rtol: float = REAL_AXIS_RTOL) -> PoleSet:
    """Denominator roots of alpha, with residues and half-plane labels.

    The polynomial is rewritten in x = omega tau_e, its roots taken as
    companion-matrix eigenvalues, polished with Newton steps and paired
    under omega -> -omega*.
    """
    num, den = rational_form(model)
    tau = model.params.tau_e
    k = np.arange(len(den) - 1, -1, -1)
    scaled = den * tau ** (-k.astype(float))
    scaled = scaled / np.max(np.abs(scaled))
    xs = np.roots(scaled)
    xs = [_polish(scaled, complex(x)) for x in xs]
    xs = _symmetrize(xs)
    dden = np.polyder(den)
    poles = []
    for x in xs:
        w = x / tau
        dval = np.polyval(dden, w)
        repeated = sum(1 for y in xs if abs(y - x) <= 1e-8 * max(abs(x), 1e-300)) > 1
        residue = None if (dval == 0 or repeated) else complex(np.polyval(num, w) / dval)
        poles.append(Pole(complex(w), residue, _classify(complex(w), real_axis_rtol), _backward_error(scaled, x)))
    poles.sort(key=lambda p: (p.location.imag, p.location.real))
    zeros = tuple(complex(z) for z in np.roots(num)) if len(num) > 1 else ()
    causal = all(p.location.imag < 0 for p in poles)
    return PoleSet(model.name, tuple(poles), causal, zeros)


# ---------------------------------------------------------------------------
# Crossing relation
# ---------------------------------------------------------------------------


def crossing_audit(model, grid) -> float:
    """max |alpha(-w) - alpha(w)*| / |alpha(w)| over the grid."""
    w = np.asarray(getattr(grid, "points", grid), dtype=float)
    a = np.asarray(model.alpha(w))
    b = np.asarray(model.alpha(-w))
    return float(np.max(np.abs(b - np.conj(a)) / np.abs(a)))


class CrossingDefect:
    """Wraps a model and adds a constant i*eps, breaking the crossing relation."""

    def __init__(self, model, eps: float):
        self.model = model
        self.eps = eps
        self.name = f"{model.name}+defect"
        self.params = model.params
        self.form_factor = model.form_factor
        self.kind = model.kind

    def alpha(self, zeta):
        return np.asarray(self.model.alpha(zeta)) + 1j * self.eps


# ---------------------------------------------------------------------------
# Kramers-Kronig
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KKReport:
    grid: FrequencyGrid
    omega: np.ndarray
    re_direct: np.ndarray
    re_reconstructed: np.ndarray
    rel_err: np.ndarray
    max_relative_error: float
    band: Tuple[float, float]

    @property
    def discrepancy(self) -> np.ndarray:
        return self.re_reconstructed - self.re_direct


def _validate_kk_grid(grid: FrequencyGrid, band):
    pts = grid.points
    if pts[0] <= 0:
        raise InsufficientResolution("Kramers-Kronig grid must be strictly positive")
    if grid.decades < MIN_DECADES - 1e-9:
        raise InsufficientResolution(f"grid spans {grid.decades:.3g} decades; need >= {MIN_DECADES}")
    if grid.points_per_decade() < MIN_POINTS_PER_DECADE - 1e-9:
        raise InsufficientResolution(
            f"grid has {grid.points_per_decade():.1f} points/decade; need >= {MIN_POINTS_PER_DECADE}"
        )
    lo, hi = band
    if not (lo < hi):
        raise BandNotCovered("band must satisfy lo < hi")
    if lo < 10 * pts[0] * (1 - 1e-12) or hi > pts[-1] / 10 * (1 + 1e-12):
        raise BandNotCovered("grid must extend at least one decade beyond the band on each side")


def _resonance_nodes(model, lo: float, hi: float, du: float) -> np.ndarray:
    """Nodes  Re p + |Im p| sinh(u)  around weakly damped poles inside (lo, hi)."""
    try:
        poles = find_poles(model).poles
    except (NonRationalModel, AttributeError):
        return np.empty(0)
    nodes = []
    for p in poles:
        z = p.location
        if not (z.real > lo and z.real < hi and z.imag < 0 and -z.imag < 0.05 * z.real):
            continue
        width = -z.imag
        umax = math.asinh(0.5 * z.real / width)
        u = np.arange(-umax, umax + du, du)
        nodes.append(z.real + width * np.sinh(u))
    if not nodes:
        return np.empty(0)
    out = np.concatenate(nodes)
    return out[(out > lo) & (out < hi)]


def _power_fit(w, y, anchor):
    """Fit y = y_anchor (w/anchor)^p in log-log; returns (y_anchor, p)."""
    p, logy = np.polyfit(np.log(w / anchor), np.log(y), 1)
    return math.exp(logy), p


def _kk_mesh(model, grid: FrequencyGrid, refine: bool, du: float):
    pts = grid.points
    mesh = pts
    if refine:
        extra = _resonance_nodes(model, pts[0], pts[-1], du)
        if extra.size:
            mesh = np.union1d(pts, extra)
    im = np.asarray(model.alpha(mesh)).imag
    return mesh, im


def _tails(grid: FrequencyGrid, imag_on_grid: np.ndarray):
    pts = grid.points
    lo_sel = pts <= pts[0] * 10
    hi_sel = pts >= pts[-1] / 10
    if np.any(imag_on_grid[lo_sel] <= 0) or np.any(imag_on_grid[hi_sel] <= 0):
        raise InsufficientResolution("Im alpha must be positive at the grid ends to fit power-law tails")
    return (
        _power_fit(pts[lo_sel], imag_on_grid[lo_sel], pts[0]),
        _power_fit(pts[hi_sel], imag_on_grid[hi_sel], pts[-1]),
    )


def kk_reconstruct(
    model, grid: FrequencyGrid, band: Tuple[float, float], refine: bool = True, du: float = 0.002,
    n_tail_terms: int = 12,
) -> KKReport:
    """Reconstruct Re alpha on the band from Im alpha sampled on ``grid``.

    Singularity subtraction: the integrand [G(w') - G(w)]/(w'^2 - w^2),
    G = w' Im alpha, is regular and integrated with the trapezoid rule; the
    subtracted piece G(w) P int_a^b dw'/(w'^2 - w^2) is done in closed form.
    Beyond the grid Im alpha is extended by power laws fitted over the outer
    decades.  Weakly damped poles (from :func:`find_poles`) get extra nodes
    spaced like sinh(u) so that resonance lines narrower than the grid
    spacing are still integrated.
    """
    _validate_kk_grid(grid, band)
    pts = grid.points
    a, b = pts[0], pts[-1]
    mesh, im = _kk_mesh(model, grid, refine, du)
    im_grid = np.interp(pts, mesh, im)
    (y_lo, p_lo), (y_hi, p_hi) = _tails(grid, im_grid)
    if p_hi >= 0.0 or p_lo <= -2.0:
        raise InsufficientResolution("fitted Im alpha tails are not integrable")

    sel = (pts >= band[0]) & (pts <= band[1])
    w = pts[sel]
    G = mesh * im
    dG = np.gradient(G, mesh)
    idx = np.searchsorted(mesh, w)
    Gw = G[idx]

    diff = mesh[None, :] ** 2 - w[:, None] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        g = (G[None, :] - Gw[:, None]) / diff
    rows = np.arange(w.size)
    g[rows, idx] = dG[idx] / (2.0 * w)
    mid = np.trapezoid(g, mesh, axis=1)
    logterm = Gw / (2.0 * w) * (np.log((b - w) / (b + w)) - np.log((w - a) / (a + w)))

    # tails in s = w'/b and s = w'/a, expanded in (w/b)^2 and (a/w)^2
    n = np.arange(n_tail_terms)[:, None]
    upper = y_hi * np.sum((w[None, :] / b) ** (2 * n) / (2 * n - p_hi), axis=0)
    lower = -y_lo * np.sum((a / w[None, :]) ** (2 * n + 2) / (p_lo + 2 + 2 * n), axis=0)

    rec = 2.0 / math.pi * (mid + logterm + upper + lower)
    direct = np.asarray(model.alpha(w)).real
    rel = np.abs(rec - direct) / np.abs(direct)
    return KKReport(grid, w, direct, rec, rel, float(np.max(rel)), (float(band[0]), float(band[1])))


def kk_sum_rule(model, grid: FrequencyGrid, refine: bool = True, du: float = 0.002) -> float:
    """Static value  (2/pi) int_0^inf Im alpha(w')/w' dw'  reconstructed from Im alpha."""
    if grid.decades < MIN_DECADES - 1e-9 or grid.points_per_decade() < MIN_POINTS_PER_DECADE - 1e-9:
        raise InsufficientResolution("grid too short or too coarse for the sum rule")
    pts = grid.points
    mesh, im = _kk_mesh(model, grid, refine, du)
    (y_lo, p_lo), (y_hi, p_hi) = _tails(grid, np.interp(pts, mesh, im))
    if p_lo <= 0 or p_hi >= 0:
        raise InsufficientResolution("fitted Im alpha tails are not integrable")
    mid = np.trapezoid(im / mesh, mesh)
    return 2.0 / math.pi * (mid + y_lo / p_lo - y_hi / p_hi)
