"""Command-line front end: steady, travel, evolve and verify.

Configuration is an INI file with the sections below; every key is optional
and unknown sections or keys are rejected.  Results are written to ``--out``
as JSON (schema ``stokeswave/1``) and CSV.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .capgrav import CapGravParams, capgrav_apply, capgrav_solve
from .errors import PreconditionError, SolverError, StepRejected
from .evolution import EvolutionConfig, evolve, fit_decay
from .geometry import build_geometry
from .nsnd import (
    PsiOperator,
    asymmetry,
    coercivity_constant,
    commutator_defect,
    flat_strip_symbol,
)
from .spectral import GridSpec, SurfaceField, project_mean_zero, sobolev_norm
from .traveling import continuation_in_gamma, reflection_defect

SCHEMA = "stokeswave/1"
log = logging.getLogger("stokeswave")

DEFAULTS: dict[str, dict[str, str]] = {
    "grid": {"Nx": "32", "Nz": "16", "b": "1.0"},
    "physics": {"g": "1.0", "sigma": "1.0"},
    "forcing": {"phi": "cos1:0.3"},
    "steady": {"tol": "1e-12"},
    "travel": {"model": "stokes", "gammas": "0.0", "tol": "1e-10", "max_iter": "100"},
    "evolve": {
        "init": "wave+perturbation",
        "gamma": "0.0",
        "perturbation": "cos1:1e-3",
        "dt": "0.05",
        "T": "8.0",
        "epsilon": "0.0",
        "scheme": "rk4_explicit",
        "record_every": "1",
        "profile_every": "20",
        "s_index": "2",
        "A_weight": "1.0",
        "decay_fit": "yes",
        "tol": "1e-10",
    },
    "verify": {
        "suites": "flat-symbol, self-adjoint, coercivity, roundtrip, commutator",
        "Nx": "32",
        "Nz": "32",
        "eta_amp": "0.4",
        "modes": "8",
    },
}

SUITES = ("flat-symbol", "self-adjoint", "coercivity", "roundtrip", "commutator")


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- config


def load_config(path: str | None) -> dict[str, dict[str, str]]:
    """Merge the file over the defaults; reject unknown sections and keys."""
    cfg = {sec: dict(vals) for sec, vals in DEFAULTS.items()}
    if path is None:
        return cfg
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for sec in parser.sections():
        if sec not in cfg:
            raise ConfigError(f"unknown config section [{sec}]")
        for key, val in parser.items(sec):
            if key not in cfg[sec]:
                raise ConfigError(f"unknown config key '{key}' in [{sec}]")
            cfg[sec][key] = val.strip()
    return cfg


def _get(cfg, sec, key, kind=float):
    raw = cfg[sec][key]
    try:
        if kind is bool:
            low = raw.lower()
            if low not in ("yes", "no", "true", "false", "1", "0"):
                raise ValueError(raw)
            return low in ("yes", "true", "1")
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for '{key}' in [{sec}]: {raw!r}") from exc


def _floats(cfg, sec, key) -> list[float]:
    raw = cfg[sec][key]
    try:
        return [float(v) for v in raw.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"bad list for '{key}' in [{sec}]: {raw!r}") from exc


def parse_surface(spec: str, grid: GridSpec, rng: np.random.Generator | None = None) -> SurfaceField:
    """``const:c``, ``cosN:amp``, ``sinN:amp``, ``random:amp`` or a list a0, a1, b1, a2, ..."""
    spec = spec.strip()
    try:
        if spec.startswith("const:"):
            return SurfaceField.constant(grid, float(spec[6:]))
        for name, fn in (("cos", np.cos), ("sin", np.sin)):
            if spec.startswith(name) and ":" in spec:
                mode, amp = spec[len(name) :].split(":", 1)
                n, a = int(mode), float(amp)
                return SurfaceField.from_function(grid, lambda x: a * fn(n * x))
        if spec.startswith("random:"):
            amp = float(spec[7:])
            rng = rng or np.random.default_rng(0)
            c = np.zeros(9)
            c[1:] = rng.standard_normal(8) / np.repeat(np.arange(1, 5), 2) ** 2
            field = SurfaceField.from_real_coeffs(grid, c)
            return field * (amp / field.max_abs())
        coeffs = [float(v) for v in spec.replace(",", " ").split()]
        return SurfaceField.from_real_coeffs(grid, np.array(coeffs))
    except ValueError as exc:
        raise ConfigError(f"cannot parse surface specification {spec!r}: {exc}") from exc


def resolve(cfg):
    Nx = _get(cfg, "grid", "Nx", int)
    Nz = _get(cfg, "grid", "Nz", int)
    b = _get(cfg, "grid", "b")
    try:
        grid = GridSpec(Nx, Nz, b)
        params = CapGravParams(_get(cfg, "physics", "g"), _get(cfg, "physics", "sigma"), b)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    phi = parse_surface(cfg["forcing"]["phi"], grid)
    if not float(np.min(-phi.values)) > -params.g * params.b:
        raise ConfigError(f"forcing violates min(-phi) > -g b (min(-phi) = {np.min(-phi.values):.6g})")
    return grid, params, phi


# ---------------------------------------------------------------- output


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def to_json(obj, indent: int = 0) -> str:
    """JSON with every float written to 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{to_json(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool) for v in seq):
            return "[" + ", ".join(to_json(v) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in seq) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(obj) if math.isfinite(obj) else "null"
    return json.dumps(str(obj))


def write_json(path: Path, payload: dict) -> None:
    path.write_text(to_json(payload) + "\n")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _surface(u: SurfaceField) -> dict:
    return {"real_coeffs": u.real_coeffs(), "values": u.values}


def _envelope(command: str, cfg, args) -> dict:
    return {"schema": SCHEMA, "command": command, "seed": args.seed, "config": cfg}


# ---------------------------------------------------------------- commands


def cmd_steady(cfg, args, out: Path) -> int:
    grid, params, phi = resolve(cfg)
    res = capgrav_solve(phi, params, tol=_get(cfg, "steady", "tol"), full_output=True)
    resid = capgrav_apply(res.eta, params) + phi
    payload = _envelope("steady", cfg, args)
    payload.update(
        x=grid.x,
        eta_star=_surface(res.eta),
        newton={"iterations": res.iterations, "residuals": res.residuals},
        residual_max=resid.max_abs(),
        min_depth=res.min_depth,
    )
    write_json(out / "steady.json", payload)
    log.info("steady surface: %d Newton iterations, residual %.3e", res.iterations, res.residual)
    return 0


def _wave_record(r) -> dict:
    return {
        "gamma": r.gamma,
        "model": r.model,
        "converged": r.converged,
        "error": r.error,
        "iterations": r.iterations,
        "contraction_ratios": r.contraction_ratios,
        "residual": r.residual,
        "fixed_point_defect": r.fixed_point_defect,
        "mass_log": r.mass_log,
        "eta_w": _surface(r.eta_w) if r.converged else None,
    }


def _symmetry_defects(results) -> list:
    out = []
    by_gamma = {r.gamma: r for r in results if r.converged}
    for g, r in by_gamma.items():
        if g > 0 and -g in by_gamma:
            out.append({"gamma": g, "defect": reflection_defect(r, by_gamma[-g])})
    return out


def cmd_travel(cfg, args, out: Path) -> int:
    grid, params, phi = resolve(cfg)
    model = cfg["travel"]["model"]
    models = {"stokes": ["stokes"], "navier-stokes": ["navier-stokes"], "both": ["stokes", "navier-stokes"]}
    if model not in models:
        raise ConfigError(f"bad value for 'model' in [travel]: {model!r}")
    gammas = sorted(_floats(cfg, "travel", "gammas"), key=lambda g: (abs(g), g))
    tol = _get(cfg, "travel", "tol")
    max_iter = _get(cfg, "travel", "max_iter", int)

    def job(m):
        return continuation_in_gamma(phi, gammas, params, tol=tol, model=m, max_iter=max_iter)

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        reports = dict(zip(models[model], pool.map(job, models[model])))

    payload = _envelope("travel", cfg, args)
    payload["x"] = grid.x
    payload["sweeps"] = {
        m: {
            "frontier": rep.frontier,
            "results": [_wave_record(r) for r in rep.results],
            "symmetry_defects": _symmetry_defects(rep.results),
        }
        for m, rep in reports.items()
    }
    if len(reports) == 2:
        gaps = []
        for a, b in zip(reports["stokes"].results, reports["navier-stokes"].results):
            if a.converged and b.converged:
                gaps.append({"gamma": a.gamma, "l2_gap": sobolev_norm(a.eta_w - b.eta_w, 0.0)})
        payload["model_gap"] = gaps
    write_json(out / "travel.json", payload)
    header = ["x"]
    cols = [grid.x]
    for m, rep in reports.items():
        for r in rep.results:
            if r.converged:
                header.append(f"{m}:gamma={_fmt(r.gamma)}")
                cols.append(r.eta_w.values)
    write_csv(out / "travel_profiles.csv", header, zip(*cols))
    return 0


def _initial_state(cfg, grid, params, phi, rng):
    init = cfg["evolve"]["init"]
    gamma = _get(cfg, "evolve", "gamma")
    tol = _get(cfg, "evolve", "tol")
    eta_star = capgrav_solve(phi, params)
    if init == "steady":
        return eta_star, eta_star
    if init in ("wave", "wave+perturbation"):
        rep = continuation_in_gamma(phi, [gamma], params, tol=tol)
        wave = rep.results[0]
        if not wave.converged:
            raise SolverError(f"traveling wave failed: {wave.error}")
        eta_w = wave.eta_w
        if init == "wave":
            return eta_w, eta_w
        pert = project_mean_zero(parse_surface(cfg["evolve"]["perturbation"], grid, rng))
        return eta_w + pert, eta_w
    if init.startswith("coeffs:"):
        return parse_surface(init[7:], grid), eta_star
    raise ConfigError(f"bad value for 'init' in [evolve]: {init!r}")


def cmd_evolve(cfg, args, out: Path) -> int:
    grid, params, phi = resolve(cfg)
    rng = np.random.default_rng(args.seed)
    try:
        config = EvolutionConfig(
            dt=_get(cfg, "evolve", "dt"),
            T_final=_get(cfg, "evolve", "T"),
            epsilon=_get(cfg, "evolve", "epsilon"),
            scheme=cfg["evolve"]["scheme"],
            record_every=_get(cfg, "evolve", "record_every", int),
            s_index=_get(cfg, "evolve", "s_index", int),
            A_weight=_get(cfg, "evolve", "A_weight"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    gamma = _get(cfg, "evolve", "gamma")
    eta0, ref = _initial_state(cfg, grid, params, phi, rng)
    status = 0
    try:
        trace = evolve(eta0, gamma, phi, config, params, reference=ref)
    except StepRejected as exc:
        trace = exc.trace
        status = 3
        log.error("step rejected: %s", exc)
    if status == 0 and _get(cfg, "evolve", "decay_fit", bool) and trace.norm_values[0] > 0:
        trace.decay_fit = fit_decay(trace)
    write_csv(out / "trace.csv", ["t", "norm_hs1", "energy", "mean_eta", "min_depth"], trace.rows())
    every = max(1, _get(cfg, "evolve", "profile_every", int))
    picks = list(range(0, len(trace.states), every))
    if picks[-1] != len(trace.states) - 1:
        picks.append(len(trace.states) - 1)
    header = ["x"] + [f"t={_fmt(trace.times[i])}" for i in picks]
    write_csv(out / "profiles.csv", header, zip(grid.x, *[trace.states[i].values for i in picks]))
    fit = trace.decay_fit
    payload = _envelope("evolve", cfg, args)
    payload.update(
        status="ok" if status == 0 else "StepRejected",
        note=trace.note,
        steps_recorded=len(trace.times),
        final_time=trace.times[-1],
        final_state=_surface(trace.states[-1]),
        reference=_surface(ref),
        decay_fit=None
        if fit is None
        else {
            "c0": fit.c0,
            "M2": fit.M2,
            "window": list(fit.window),
            "fit_residual": fit.residual,
            "energy_nonincreasing": fit.energy_nonincreasing,
        },
    )
    write_json(out / "evolve.json", payload)
    return status


# ---------------------------------------------------------------- verify


def _suite(name: str, grid: GridSpec, eta_amp: float, modes: int) -> dict:
    if name == "flat-symbol":
        op = PsiOperator(build_geometry(SurfaceField.zeros(grid)))
        errs = []
        for k in range(1, modes + 1):
            h = op.apply(SurfaceField.from_function(grid, lambda x: np.cos(k * x)))
            m = flat_strip_symbol(k, grid.b)
            errs.append(abs(h.real_coeffs()[2 * k - 1] + m) / m)
        return {"mode_errors": errs, "value": max(errs), "threshold": 1e-8, "passed": max(errs) < 1e-8}
    eta = SurfaceField.from_function(grid, lambda x: eta_amp * np.cos(x))
    op = PsiOperator(build_geometry(eta))
    if name == "self-adjoint":
        val = asymmetry(op.matrix())
        return {"value": val, "threshold": 1e-9, "passed": val < 1e-9}
    if name == "coercivity":
        val = coercivity_constant(op.matrix())
        return {"value": val, "threshold": 0.0, "passed": val > 0}
    if name == "roundtrip":
        rng = np.random.default_rng(1)
        errs = []
        for _ in range(5):
            c = np.zeros(2 * min(modes, grid.Nx // 2 - 1) + 1)
            c[1:] = rng.standard_normal(c.size - 1)
            chi = SurfaceField.from_real_coeffs(grid, c)
            back = op.inverse_apply(op.apply(chi))
            errs.append(sobolev_norm(back - chi, 0) / sobolev_norm(chi, 0))
        return {"errors": errs, "value": max(errs), "threshold": 1e-7, "passed": max(errs) < 1e-7}
    if name == "commutator":
        chi = SurfaceField.from_function(grid, lambda x: np.cos(x) + 0.5 * np.sin(2 * x))
        flat = PsiOperator(build_geometry(SurfaceField.zeros(grid)))
        d0 = commutator_defect(flat, chi, 1)
        d1 = commutator_defect(op, chi, 1)
        return {"flat": d0, "curved": d1, "value": d0, "threshold": 1e-10, "passed": d0 < 1e-10}
    raise ConfigError(f"unknown verify suite {name!r}")


def cmd_verify(cfg, args, out: Path) -> int:
    base, _, _ = resolve(cfg)
    try:
        grid = GridSpec(_get(cfg, "verify", "Nx", int), _get(cfg, "verify", "Nz", int), base.b)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    suites = [s.strip() for s in cfg["verify"]["suites"].split(",") if s.strip()]
    for s in suites:
        if s not in SUITES:
            raise ConfigError(f"unknown verify suite {s!r}; choose from {', '.join(SUITES)}")
    eta_amp = _get(cfg, "verify", "eta_amp")
    modes = _get(cfg, "verify", "modes", int)
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        results = list(pool.map(lambda s: _suite(s, grid, eta_amp, modes), suites))
    report = dict(zip(suites, results))
    passed = all(r["passed"] for r in results)
    payload = _envelope("verify", cfg, args)
    payload.update(passed=passed, suites=report)
    write_json(out / "verify.json", payload)
    for s, r in report.items():
        log.info("%-13s %s  value=%.3e", s, "PASS" if r["passed"] else "FAIL", r["value"])
    return 0 if passed else 1


COMMANDS = {"steady": cmd_steady, "travel": cmd_travel, "evolve": cmd_evolve, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stokeswave", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--threads", type=int, default=1, help="worker threads for independent jobs")
    p.add_argument("--seed", type=int, default=0, help="seed for random perturbations")
    p.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        cfg = load_config(args.config)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args, out)
    except (ConfigError, PreconditionError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 2
    except SolverError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
