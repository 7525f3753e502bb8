"""Command-line front end: ``radreact <subcommand> [options]``.

Exit codes: 0 success, 1 verification failed, 2 configuration error,
3 numerical failure (a JSON diagnostic is written to stderr).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .causality import CrossingDefect, crossing_audit, find_poles, kk_reconstruct
from .errors import ConfigError, InvalidParameter, RadReactError, TooShort
from .params import PRESETS, FrequencyGrid, load_config, preset
from .response import FormFactor, ald_model, fo_model, general_model
from .scattering import SCATTERING_COLUMNS, optical_theorem_sweep, scattering_rows, scattering_summary
from .timedomain import (
    ForceProfile,
    ald_nonrunaway_response,
    integrate_ald,
    integrate_fo,
    stability_verdict,
)

OPTICAL_TOL = 1e-12
CROSSING_TOL = 1e-15
KK_TOL = 1e-3
PARAM_KEYS = ("charge", "mass", "c", "omega0", "cutoff")


def _fmt(x) -> str:
    return "%.17g" % x


@dataclass
class RunConfig:
    command: str
    preset: str
    params: object
    grid_min: Optional[float] = None
    grid_max: Optional[float] = None
    points: Optional[int] = None
    spacing: Optional[str] = None
    out: str = "."
    threads: int = 1
    eq13_exponent: int = 4
    omega0_units: str = "rad"
    options: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "preset": self.preset,
            "params": self.params.as_dict(),
            "grid": {"min": self.grid_min, "max": self.grid_max, "points": self.points, "spacing": self.spacing},
            "eq13_exponent": self.eq13_exponent,
            "omega0_units": self.omega0_units,
            "options": self.options,
        }

    @property
    def digest(self) -> str:
        text = json.dumps(self.as_dict(), sort_keys=True, default=repr)
        return hashlib.sha256(text.encode()).hexdigest()

    def grid(self, lo: float, hi: float, n: int, spacing: str = "logarithmic") -> FrequencyGrid:
        lo = lo if self.grid_min is None else self.grid_min
        hi = hi if self.grid_max is None else self.grid_max
        n = n if self.points is None else self.points
        spacing = spacing if self.spacing is None else self.spacing
        if not lo < hi:
            raise ConfigError(f"grid min must be < max, got [{lo}, {hi}]")
        if n < 2:
            raise ConfigError(f"grid needs at least 2 points, got {n}")
        if spacing in ("log", "logarithmic"):
            return FrequencyGrid.logarithmic(lo, hi, n)
        if spacing == "linear":
            return FrequencyGrid.linear(lo, hi, n)
        raise ConfigError(f"unknown spacing {spacing!r}")


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _common(suppress: bool) -> argparse.ArgumentParser:
    default = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False, argument_default=default)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--config", metavar="FILE", help="key = value parameter file")
    p.add_argument("--out", metavar="DIR", help="output directory (or a .csv path where one file is written)")
    p.add_argument("--threads", type=int)
    p.add_argument("--omega0-units", choices=("rad", "hz"))
    p.add_argument("--eq13-exponent", type=int, choices=(2, 4))
    p.add_argument("--charge", type=float, help="esu")
    p.add_argument("--mass", type=float, help="g")
    p.add_argument("--c", type=float, help="cm/s")
    p.add_argument("--omega0", type=float, help="rad/s (Hz with --omega0-units hz)")
    p.add_argument("--cutoff", help="rad/s or 'critical'")
    return p


def _grid_flags(p: argparse.ArgumentParser):
    p.add_argument("--grid-min", type=float)
    p.add_argument("--grid-max", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--spacing", choices=("log", "logarithmic", "linear"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radreact",
        description="Radiation-reaction oscillator models: polarizabilities, scattering, causality checks.",
        parents=[_common(False)],
        allow_abbrev=False,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    # prefix matching would make --omega ambiguous with --omega0
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common(True)

    p = sub.add_parser("sweep", parents=[common], allow_abbrev=False, help="tabulate both polarizabilities on a grid")
    _grid_flags(p)

    p = sub.add_parser("verify", parents=[common], allow_abbrev=False, help="optical theorem, crossing, causality and KK checks")
    _grid_flags(p)
    p.add_argument("--model", choices=("both", "fo", "ald"), default="both")
    p.add_argument("--crossing-defect", type=float, default=0.0, metavar="EPS",
                   help="add i*EPS to alpha (harness sanity fixture)")

    p = sub.add_parser("poles", parents=[common], allow_abbrev=False, help="denominator roots as JSON")
    p.add_argument("--model", choices=("fo", "ald", "general"), default="fo")
    p.add_argument("--form-cutoff", type=float, help="Lorentzian cutoff for --model general (rad/s)")

    p = sub.add_parser("kk", parents=[common], allow_abbrev=False, help="Kramers-Kronig reconstruction of Re alpha")
    _grid_flags(p)
    p.add_argument("--model", choices=("fo", "ald"), default="fo")
    p.add_argument("--band-lo", type=float, help="rad/s (default 0.5 omega0)")
    p.add_argument("--band-hi", type=float, help="rad/s (default 2 omega0)")

    p = sub.add_parser("timedomain", parents=[common], allow_abbrev=False, help="integrate the equations of motion")
    p.add_argument("--model", choices=("fo", "ald", "ald-nonrunaway"), default="fo")
    p.add_argument("--force", choices=("step", "sin", "impulse", "zero"), default="step")
    p.add_argument("--f0", type=float, default=1e-3, help="dyn (dyn s for impulse)")
    p.add_argument("--omega", type=float, help="drive frequency, rad/s (default omega0)")
    p.add_argument("--t-on", type=float, default=0.0)
    p.add_argument("--t-start", type=float, default=0.0)
    p.add_argument("--t-end", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--a0", type=float, default=0.0, help="initial acceleration for --model ald (cm/s^2)")
    p.add_argument("--r0", type=float, default=0.0, help="initial displacement (cm)")

    p = sub.add_parser("figure1", parents=[common], allow_abbrev=False, help="main-band and high-frequency polarizability tables")
    p.add_argument("--points", type=int, default=2000)
    p.add_argument("--inset-points", type=int, default=2000)
    p.add_argument("--convention", choices=("e2alpha", "ealpha"), default="e2alpha",
                   help="tabulate e^2 alpha (cm^3) or e alpha")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    file_cfg = load_config(args.config) if getattr(args, "config", None) else {}

    def pick(name, default=None):
        v = getattr(args, name, None)
        if v is not None:
            return v
        return file_cfg.get(name, default)

    name = pick("preset", "electron-cgs")
    units = pick("omega0_units", "rad")
    if units not in ("rad", "hz"):
        raise ConfigError(f"omega0_units must be 'rad' or 'hz', got {units!r}")
    overrides = {k: pick(k) for k in PARAM_KEYS}
    if overrides["omega0"] is not None and units == "hz":
        overrides["omega0"] = 2 * math.pi * float(overrides["omega0"])
    try:
        params = preset(name, **overrides)
    except InvalidParameter as exc:
        raise ConfigError(str(exc)) from exc
    exponent = int(pick("eq13_exponent", 4))
    if exponent not in (2, 4):
        raise ConfigError("eq13_exponent must be 2 or 4")
    threads = int(pick("threads", 1))
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    cfg = RunConfig(
        command=args.command,
        preset=name,
        params=params,
        grid_min=pick("grid_min"),
        grid_max=pick("grid_max"),
        points=pick("points") if args.command != "figure1" else None,
        spacing=pick("spacing"),
        out=pick("out", "."),
        threads=threads,
        eq13_exponent=exponent,
        omega0_units=units,
    )
    skip = set(PARAM_KEYS) | {"preset", "config", "out", "threads", "omega0_units", "eq13_exponent",
                              "grid_min", "grid_max", "points", "spacing", "command"}
    cfg.options = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    if args.command == "figure1":
        cfg.options["points"] = int(pick("points", 2000))
    if "model" in file_cfg and "model" not in cfg.options:
        cfg.options["model"] = file_cfg["model"]
    return cfg


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _out_path(cfg: RunConfig, default_name: str) -> str:
    if cfg.out.endswith(".csv"):
        path = cfg.out if default_name.endswith(".csv") else os.path.splitext(cfg.out)[0] + "_" + default_name
    else:
        path = os.path.join(cfg.out, default_name)
    return path


def _prepare_out(cfg: RunConfig):
    directory = os.path.dirname(cfg.out) if cfg.out.endswith(".csv") else cfg.out
    directory = directory or "."
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {directory!r}: {exc}") from exc
    if not os.access(directory, os.W_OK):
        raise ConfigError(f"output directory {directory!r} is not writable")


def write_csv(path: str, columns, rows, cfg: RunConfig, units: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# radreact {cfg.command}; units: {units}; config_sha256={cfg.digest}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path: str, payload: dict):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parallel_alpha(model, w: np.ndarray, threads: int) -> np.ndarray:
    """alpha on w, computed in ordered chunks; elementwise arithmetic makes the result thread-count independent."""
    if threads <= 1 or w.size < 2 * threads:
        return np.asarray(model.alpha(w))
    chunks = np.array_split(w, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda c: np.asarray(model.alpha(c)), chunks))
    return np.concatenate(parts)


def _compare(cfg: RunConfig, w: np.ndarray):
    p = cfg.params
    a_ald = _parallel_alpha(ald_model(p), w, cfg.threads)
    a_fo = _parallel_alpha(fo_model(p), w, cfg.threads)
    rel = np.abs(a_fo - a_ald) / np.abs(a_ald)
    return a_ald, a_fo, rel


ALPHA_UNITS = "omega=rad/s alpha=s^2/g"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_sweep(cfg: RunConfig) -> int:
    grid = cfg.grid(1e13, 1e18, 2000)
    w = grid.points
    a_ald, a_fo, rel = _compare(cfg, w)
    rows = zip(w, a_ald.real, a_ald.imag, a_fo.real, a_fo.imag, rel)
    cols = ("omega", "re_alpha_ald", "im_alpha_ald", "re_alpha_fo", "im_alpha_fo", "rel_diff")
    path = _out_path(cfg, "sweep.csv")
    write_csv(path, cols, rows, cfg, ALPHA_UNITS + " rel_diff=1")
    print(json.dumps({"file": path, "rows": int(w.size), "max_rel_diff": float(np.max(rel))}, sort_keys=True))
    return 0


def _check(value, threshold, passed) -> dict:
    return {"value": value, "threshold": threshold, "pass": bool(passed)}


def _verify_model(cfg: RunConfig, model, grid: FrequencyGrid) -> dict:
    p = cfg.params
    sweep = optical_theorem_sweep(model, grid.points, eq13_exponent=cfg.eq13_exponent)
    opt = float(np.max(sweep["residual"]))
    cross = crossing_audit(model, grid)
    poles = find_poles(model)
    w0 = p.omega0
    report = {
        "optical": _check(opt, OPTICAL_TOL, opt <= OPTICAL_TOL),
        "crossing": _check(cross, CROSSING_TOL, cross <= CROSSING_TOL),
        "causal": {"value": poles.causal, "pass": poles.causal, "poles": poles.as_dict()["roots"]},
    }
    if w0 > 0:
        band = (0.5 * w0, 2.0 * w0)
        kgrid = FrequencyGrid.logarithmic(band[0] * 1e-3, band[1] * 1e3, int(math.ceil(200 * (6 + math.log10(4)))) + 1)
        try:
            kk = kk_reconstruct(model, kgrid, band)
            report["kk"] = _check(kk.max_relative_error, KK_TOL, kk.max_relative_error <= KK_TOL)
        except RadReactError as exc:
            report["kk"] = {"value": None, "threshold": KK_TOL, "pass": False, "error": str(exc)}
        # diagnostic near 1/tau_e, where an upper-half-plane pole at i/tau_e is not negligible
        hb = (0.5 / p.tau_e, 2.0 / p.tau_e)
        # the grid must contain the resonance, which carries the high-frequency Re alpha
        lo, hi = 1e-3 * w0, 1e3 * hb[1]
        hgrid = FrequencyGrid.logarithmic(lo, hi, int(math.ceil(200 * math.log10(hi / lo))) + 1)
        try:
            report["kk_high_band_diagnostic"] = {
                "band": list(hb), "max_relative_error": kk_reconstruct(model, hgrid, hb).max_relative_error,
            }
        except RadReactError as exc:
            report["kk_high_band_diagnostic"] = {"band": list(hb), "error": str(exc)}
    report["failed"] = sorted(k for k, v in report.items() if isinstance(v, dict) and v.get("pass") is False)
    return report, sweep


def cmd_verify(cfg: RunConfig) -> int:
    p = cfg.params
    grid = cfg.grid(1e12, 1e22, 2000)
    eps = cfg.options.get("crossing_defect", 0.0) or 0.0
    which = cfg.options.get("model", "both")
    models = {"fo": fo_model(p), "ald": ald_model(p)}
    if which != "both":
        models = {which: models[which]}
    out = {"config_sha256": cfg.digest, "params": p.as_dict(), "models": {}}
    for name, model in models.items():
        m = CrossingDefect(model, eps) if eps else model
        report, sweep = _verify_model(cfg, m, grid)
        out["models"][name] = report
        write_csv(_out_path(cfg, f"scattering_{name}.csv"), SCATTERING_COLUMNS, scattering_rows(sweep), cfg,
                  "omega=rad/s alpha=s^2/g sigma=cm^2 residual=1")
        out["models"][name]["scattering"] = scattering_summary(model, sweep)
    ok = True
    if "fo" in out["models"]:
        ok &= out["models"]["fo"]["failed"] == []
    if "ald" in out["models"]:
        ok &= out["models"]["ald"]["failed"] == ["causal"]
    out["verdict"] = "pass" if ok else "fail"
    write_json(_out_path(cfg, "verify.json"), out)
    summary = {name: {k: r[k]["pass"] for k in ("optical", "crossing", "causal", "kk") if k in r}
               for name, r in out["models"].items()}
    print(json.dumps({"verdict": out["verdict"], "checks": summary}, sort_keys=True))
    return 0 if ok else 1


def _model_for(cfg: RunConfig, name: str):
    p = cfg.params
    if name == "fo":
        return fo_model(p)
    if name == "ald":
        return ald_model(p)
    cut = cfg.options.get("form_cutoff") or p.cutoff
    return general_model(p.replace(cutoff=cut), FormFactor.lorentzian(cut))


def cmd_poles(cfg: RunConfig) -> int:
    name = cfg.options.get("model", "fo")
    ps = find_poles(_model_for(cfg, name))
    payload = ps.as_dict()
    payload["model"] = name
    write_json(_out_path(cfg, f"poles_{name}.json"), payload)
    print(json.dumps(payload, sort_keys=True))
    return 0


def cmd_kk(cfg: RunConfig) -> int:
    p = cfg.params
    name = cfg.options.get("model", "fo")
    lo = cfg.options.get("band_lo") or 0.5 * p.omega0
    hi = cfg.options.get("band_hi") or 2.0 * p.omega0
    if not lo > 0:
        raise ConfigError("band needs omega0 > 0 or explicit --band-lo/--band-hi")
    # reach below the resonance so it is on the grid rather than in the fitted tail
    glo = 1e-3 * (min(lo, p.omega0) if p.omega0 > 0 else lo)
    ghi = 1e3 * hi
    grid = cfg.grid(glo, ghi, int(math.ceil(200 * math.log10(ghi / glo))) + 1)
    rep = kk_reconstruct(_model_for(cfg, name), grid, (lo, hi))
    path = _out_path(cfg, f"kk_{name}.csv")
    write_csv(path, ("omega", "re_direct", "re_reconstructed", "rel_err"),
              zip(rep.omega, rep.re_direct, rep.re_reconstructed, rep.rel_err), cfg,
              ALPHA_UNITS + " rel_err=1")
    print(json.dumps({"file": path, "model": name, "band": list(rep.band),
                      "max_relative_error": rep.max_relative_error}, sort_keys=True))
    return 0


def cmd_timedomain(cfg: RunConfig) -> int:
    p = cfg.params
    o = cfg.options
    name = o.get("model", "fo")
    omega = o.get("omega") or p.omega0
    kind = {"sin": "sinusoid"}.get(o["force"], o["force"])
    force = ForceProfile(kind, o["f0"], omega if kind == "sinusoid" else 0.0, o["t_on"])
    t0 = o["t_start"]
    if name == "fo":
        fast = max(p.omega0, p.gamma, force.omega)
        dt = o.get("dt") or (0.01 / fast if fast > 0 else 0.01 * p.tau_e)
        t_end = o.get("t_end") or (t0 + 2000 * dt)
        traj = integrate_fo(p, force, t_end, dt, R0=o["r0"], t_start=t0)
    elif name == "ald":
        dt = o.get("dt") or 0.01 * p.tau_e
        t_end = o.get("t_end") or (t0 + 30 * p.tau_e)
        traj = integrate_ald(p, force, t_end, dt, A0=o["a0"], R0=o["r0"], t_start=t0)
    else:
        dt = o.get("dt") or 0.01 * p.tau_e
        t_end = o.get("t_end") or (t0 + 30 * p.tau_e)
        n = int(math.ceil((t_end - t0) / dt - 1e-9))
        traj = ald_nonrunaway_response(p, force, t0 + dt * np.arange(n + 1))
    path = _out_path(cfg, "timedomain.csv")
    aux = traj.aux_name
    units = f"t=s R=cm V=cm/s {aux}={'cm/s' if aux == 'y' else 'cm/s^2'}"
    write_csv(path, ("t", "R", "V", aux), zip(traj.times, traj.R, traj.V, traj.aux), cfg, units)
    try:
        verdict = stability_verdict(traj).as_dict()
    except TooShort as exc:
        verdict = {"error": str(exc)}
    sidecar = {"config_sha256": cfg.digest, "model": traj.model, "steps": len(traj) - 1, "dt": traj.dt,
               "truncated": traj.truncated, "verdict": verdict}
    write_json(os.path.splitext(path)[0] + ".json", sidecar)
    print(json.dumps(sidecar, sort_keys=True))
    return 0


def cmd_figure1(cfg: RunConfig) -> int:
    p = cfg.params
    o = cfg.options
    scale = p.charge**2 if o.get("convention", "e2alpha") == "e2alpha" else p.charge
    label = "e2alpha" if scale == p.charge**2 else "ealpha"
    unit = "cm^3" if label == "e2alpha" else "cm s/statvolt"
    cols = ("omega", f"re_{label}_ald", f"im_{label}_ald", f"re_{label}_fo", f"im_{label}_fo", "rel_diff")
    bands = {
        "main": FrequencyGrid.linear(0.1 * p.omega0, 2.0 * p.omega0, o.get("points", 2000)),
        "inset": FrequencyGrid.logarithmic(1e17, 1e24, o.get("inset_points", 2000)),
    }
    meta = {"config_sha256": cfg.digest, "params": p.as_dict(), "convention": label, "files": {}}
    for band, grid in bands.items():
        w = grid.points
        a_ald, a_fo, rel = _compare(cfg, w)
        a_ald, a_fo = a_ald * scale, a_fo * scale
        path = _out_path(cfg, f"figure1_{band}.csv")
        write_csv(path, cols, zip(w, a_ald.real, a_ald.imag, a_fo.real, a_fo.imag, rel), cfg,
                  f"omega=rad/s {label}={unit} rel_diff=1")
        low = w <= 10 * p.omega0
        meta["files"][band] = {
            "path": path,
            "rows": int(w.size),
            "omega_min": float(w[0]),
            "omega_max": float(w[-1]),
            "max_rel_diff": float(np.max(rel)),
            "max_rel_diff_below_10_omega0": float(np.max(rel[low])) if np.any(low) else None,
        }
    write_json(_out_path(cfg, "figure1.json"), meta)
    print(json.dumps(meta["files"], sort_keys=True))
    return 0


COMMANDS = {
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "poles": cmd_poles,
    "kk": cmd_kk,
    "timedomain": cmd_timedomain,
    "figure1": cmd_figure1,
}


def _fail(code: int, exc: BaseException, command: str) -> int:
    diag = {"error": type(exc).__name__, "message": str(exc), "command": command}
    if getattr(exc, "zeta", None) is not None:
        diag["zeta"] = repr(exc.zeta)
    print(json.dumps(diag, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        _prepare_out(cfg)
    except (ConfigError, InvalidParameter, OSError) as exc:
        return _fail(2, exc, args.command)
    try:
        return COMMANDS[args.command](cfg)
    except (ConfigError, InvalidParameter) as exc:
        return _fail(2, exc, args.command)
    except (RadReactError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return _fail(3, exc, args.command)


if __name__ == "__main__":
    sys.exit(main())
