"""Command-line driver.

    tqdiff [--config FILE] [--out DIR] COMMAND [options]

Commands: constants, front, oscillator, pde, sde, spectrum, verify.

A JSON config holds a shared ``params`` section (m, b, T, hbar, kB, omega0)
and one section per command; command-line flags override file values.  Every
CSV starts with ``#`` lines carrying the version, seed and a parameter echo, and
contains nothing time- or host-dependent, so re-running with the echoed
parameters reproduces the file byte for byte.

Exit status: 0 success, 1 failed verification, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, analytic, moments, pde, spectral, verify
from .errors import DomainError, NumericError, ParameterError
from .langevin import SdeConfig, simulate
from .phys import derive, params_from_mapping, params_to_mapping

OUTPUT_ENV = "TQDIFF_OUTPUT_DIR"

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

PARAM_FLAGS = ("m", "b", "T", "hbar", "kB", "omega0")


class ConfigError(ParameterError):
    pass


# --- config handling -----------------------------------------------------------


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {p} must hold a JSON object")
    return data


def merged_section(config: dict, name: str, args: argparse.Namespace, keys: Sequence[str]) -> dict:
    """Config section ``name`` overlaid with every flag in ``keys`` that was given."""
    section = dict(config.get(name) or {})
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            section[k] = v
    return section


def resolve_params(config: dict, args: argparse.Namespace):
    section = merged_section(config, "params", args, PARAM_FLAGS)
    p = params_from_mapping(section)
    derive(p)
    return p


def output_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return out


# --- output --------------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, columns: Sequence[str], rows, meta: dict) -> Path:
    """CSV with '#' metadata lines (version, command, seed, params, equations)."""
    buf = io.StringIO()
    buf.write(f"# tqdiff {__version__}\n")
    for k in ("command", "seed", "equations"):
        if k in meta:
            buf.write(f"# {k}: {meta[k]}\n")
    buf.write(f"# params: {json.dumps(meta.get('params', {}), sort_keys=True)}\n")
    if meta.get("options"):
        buf.write(f"# options: {json.dumps(meta['options'], sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    try:
        path.write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def write_json(path: Path, payload: dict) -> Path:
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"input file not found: {p}")
    lines = [ln for ln in p.read_text().splitlines() if ln and not ln.startswith("#")]
    if len(lines) < 2:
        raise ConfigError(f"{p} holds no data rows")
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return header, data


def _meta(command: str, p, equations: str, seed=None, options: dict | None = None) -> dict:
    m = {"command": command, "params": params_to_mapping(p), "equations": equations}
    if seed is not None:
        m["seed"] = seed
    if options:
        m["options"] = {k: v for k, v in options.items() if v is not None}
    return m


# --- commands ------------------------------------------------------------------


def cmd_constants(args, config) -> int:
    p = resolve_params(config, args)
    c = derive(p)
    payload = {"version": __version__, "params": params_to_mapping(p), "constants": c.to_dict()}
    if p.omega0 > 0:
        payload["oscillator"] = {
            "sigma2_exact": analytic.oscillator_sigma2_exact(p),
            "effective_spring": analytic.effective_spring(p),
        }
        if p.bath.T > 0:
            payload["oscillator"]["sigma2_density_gradient"] = analytic.oscillator_sigma2_dg(p)
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if args.out or os.environ.get(OUTPUT_ENV):
        write_json(output_dir(args) / "constants.json", payload)
    return EXIT_OK


FRONT_KEYS = ("tmax", "tmin", "points")


def cmd_front(args, config) -> int:
    p = resolve_params(config, args)
    opts = merged_section(config, "front", args, FRONT_KEYS)
    c = derive(p)
    tmax = float(opts.get("tmax", 100.0))
    points = int(opts.get("points", 200))
    tmin = float(opts.get("tmin", tmax / 1e6))
    if not 0 < tmin < tmax or points < 2:
        raise ConfigError("front needs 0 < tmin < tmax and points >= 2")
    ts = np.logspace(math.log10(tmin), math.log10(tmax), points)
    rows = [(t, analytic.front_sigma2(analytic.FrontQuery(float(t), c)), analytic.einstein_msd(float(t), c.D)) for t in ts]
    path = write_csv(
        output_dir(args) / (args.output or "front.csv"),
        ("t", "sigma2_quantum", "sigma2_classical"),
        rows,
        _meta("front", p, "front law; Einstein law", options={"tmin": tmin, "tmax": tmax, "points": points}),
    )
    print(path)
    return EXIT_OK


OSC_KEYS = ("tmax", "points", "sigma2_0")


def cmd_oscillator(args, config) -> int:
    p = resolve_params(config, args)
    if p.omega0 <= 0:
        raise ConfigError("oscillator needs omega0 > 0")
    opts = merged_section(config, "oscillator", args, OSC_KEYS)
    zero_T = p.bath.T == 0
    kind = "oscillator_zero_T" if zero_T else "oscillator_thermal"
    tmax = float(opts.get("tmax", 10.0 * p.relaxation_time))
    points = int(opts.get("points", 200))
    s0 = float(opts.get("sigma2_0", 0.0))
    ts = np.linspace(0.0, tmax, points + 1)[1:]
    ode = moments.integrate_array(moments.MomentModel(kind, p), s0, ts)
    if zero_T and s0 == 0:
        closed = [analytic.zero_T_oscillator_sigma2(float(t), p) for t in ts]
        equations = "zero-temperature oscillator dispersion ODE and closed form"
    else:
        closed = [None] * ts.size
        equations = "oscillator dispersion ODE"
    out = output_dir(args)
    path = write_csv(
        out / (args.output or "oscillator.csv"),
        ("t", "sigma2_ode", "sigma2_closed", "heisenberg_product", "D_Q"),
        (
            (t, s2, cl, moments.heisenberg_product(s2, p.bath), moments.quantum_diffusion_coefficient(s2, p.bath))
            for t, s2, cl in zip(ts, ode, closed)
        ),
        _meta("oscillator", p, equations, options={"tmax": tmax, "points": points, "sigma2_0": s0}),
    )
    summary = {
        "params": params_to_mapping(p),
        "sigma2_exact": analytic.oscillator_sigma2_exact(p),
        "sigma2_fixed_point": moments.fixed_point(moments.MomentModel(kind, p)),
        "effective_spring": analytic.effective_spring(p),
        "free_energy_factor": analytic.free_energy_factor(p),
    }
    if not zero_T:
        dg = analytic.oscillator_sigma2_dg(p)
        summary["sigma2_density_gradient"] = dg
        summary["relative_discrepancy"] = dg / summary["sigma2_exact"] - 1
    write_json(out / "oscillator_summary.json", summary)
    print(path)
    return EXIT_OK


PDE_KEYS = ("model", "n", "sigma2_0", "t_end", "outputs", "half_width", "courant")


def cmd_pde(args, config) -> int:
    p = resolve_params(config, args)
    opts = merged_section(config, "pde", args, PDE_KEYS)
    model = opts.get("model", "free_thermal")
    c = derive(p)
    if model == "free_thermal":
        if c.zero_temperature:
            raise ConfigError("free_thermal needs T > 0")
        s0 = float(opts.get("sigma2_0", c.lambda_T2))
        t_end = float(opts.get("t_end", 10 * c.lambda_T2 / c.D))
    else:
        if p.omega0 <= 0:
            raise ConfigError(f"{model} needs omega0 > 0")
        s0 = float(opts.get("sigma2_0", 0.5 * analytic.oscillator_sigma2_exact(p)))
        t_end = float(opts.get("t_end", 10 * p.relaxation_time))
    outputs = int(opts.get("outputs", 20))
    ts = np.linspace(0, t_end, outputs + 1)[1:]
    run = pde.gaussian_run(
        model, p, s0, t_end, n=int(opts.get("n", 512)), half_width=opts.get("half_width"), output_times=ts, courant=float(opts.get("courant", 0.5))
    )
    r = pde.evolve(run)
    ref: list[Any]
    if model == "free_thermal":
        ref = list(moments.integrate_array(moments.MomentModel("free_thermal", p), s0, ts))
    elif model == "thermal_potential":
        ref = list(moments.integrate_array(moments.MomentModel("oscillator_thermal", p), s0, ts))
    else:
        ref = list(moments.integrate_array(moments.MomentModel("oscillator_zero_T", p), s0, ts))
    out = output_dir(args)
    path = write_csv(
        out / (args.output or "pde.csv"),
        ("t", "sigma2", "mass", "residual", "sigma2_moment_ode"),
        zip(r.times, r.sigma2, r.mass, r.residual, ref),
        _meta("pde", p, f"quantum Smoluchowski equation ({model}) vs dispersion ODE", options={**opts, "model": model, "sigma2_0": s0, "t_end": t_end}),
    )
    grid = r.snapshots[0].grid
    write_csv(
        out / "pde_density.csv",
        ("x",) + tuple(f"P_t{t!r}" for t in r.times),
        zip(grid.x, *(snap.values for snap in r.snapshots)),
        _meta("pde", p, f"density snapshots ({model})"),
    )
    print(path)
    return EXIT_OK


SDE_KEYS = (
    "n_traj",
    "dt",
    "t_end",
    "seed",
    "mode",
    "force",
    "record_stride",
    "sigma2_0",
    "closure",
    "spring_source",
    "record_trajectories",
    "burn_in",
    "moment_match",
)


def cmd_sde(args, config) -> int:
    p = resolve_params(config, args)
    opts = merged_section(config, "sde", args, SDE_KEYS)
    unknown = set(opts) - set(SDE_KEYS)
    if unknown:
        raise ConfigError(f"unknown sde keys: {sorted(unknown)}")
    cfg = SdeConfig(params=p, **opts)
    errors = cfg.validate()
    if errors:
        raise ConfigError(errors)
    r = simulate(cfg)
    out = output_dir(args)
    echo = {k: getattr(cfg, k) for k in SDE_KEYS}
    echo["dt"] = cfg.resolved_dt()
    meta = _meta("sde", p, f"Langevin ensemble ({cfg.force}, {cfg.mode})", seed=cfg.seed, options=echo)
    path = write_csv(out / (args.output or "sde.csv"), ("t", "mean", "var", "var_stderr"), zip(r.times, r.mean, r.var, r.var_stderr), meta)
    if r.trajectories is not None:
        cols = ("t",) + tuple(f"r{j}" for j in range(r.trajectories.shape[1]))
        write_csv(out / "sde_trajectories.csv", cols, ([t, *row] for t, row in zip(r.traj_times, r.trajectories)), meta)
    write_json(out / "sde_final.json", {"version": __version__, "config": echo, "params": params_to_mapping(p), "ensemble": r.final.to_dict()})
    print(path)
    return EXIT_OK


SPECTRUM_KEYS = ("input", "max_lag", "segment_len", "overlap")


def cmd_spectrum(args, config) -> int:
    p = resolve_params(config, args)
    opts = merged_section(config, "spectrum", args, SPECTRUM_KEYS)
    if "input" not in opts:
        raise ConfigError("spectrum needs --input (a trajectory CSV written by the sde command)")
    header, data = read_csv(opts["input"])
    if header[0] != "t" or data.shape[1] < 2:
        raise ConfigError(f"{opts['input']} is not a trajectory CSV")
    dt = float(np.mean(np.diff(data[:, 0])))
    ts = spectral.TimeSeries(dt, data[:, 1:].T)
    max_lag = int(opts.get("max_lag", ts.length // 4))
    seg = int(opts.get("segment_len", min(512, ts.length)))
    a = spectral.acf(ts, max_lag)
    s = spectral.psd(ts, seg, float(opts.get("overlap", 0.5)))
    theory_acf = theory_psd = None
    if p.omega0 > 0 and p.bath.T > 0:
        s2e = analytic.oscillator_sigma2_exact(p)
        theory_acf = analytic.autocorrelation_rr(a.lags, derive(p).D, s2e)
        theory_psd = analytic.spectral_density_rr(s.omega, p.bath.b, p.bath.m, p.bath.T, s2e, p.bath.kB)
    out = output_dir(args)
    meta = _meta("spectrum", p, "effective-oscillator autocorrelation and spectral density", options=opts)
    write_csv(
        out / "acf.csv",
        ("tau", "C", "stderr", "C_theory"),
        zip(a.lags, a.values, a.stderr, theory_acf if theory_acf is not None else [None] * a.lags.size),
        meta,
    )
    path = write_csv(
        out / "psd.csv",
        ("omega", "S", "S_theory"),
        zip(s.omega, s.values, theory_psd if theory_psd is not None else [None] * s.omega.size),
        meta,
    )
    print(path)
    return EXIT_OK


def cmd_verify(args, config) -> int:
    opts = merged_section(config, "verify", args, ("only",))
    tier = "full" if args.full else "quick"
    report = verify.run_checks(tier, opts.get("only"))
    path = Path(args.report) if args.report else output_dir(args) / "verify_report.json"
    verify.emit_report(report, path)
    return EXIT_OK if report.passed else EXIT_VERIFY_FAILED


# --- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tqdiff", description="Quantum Brownian diffusion toolkit.")
    parser.add_argument("--version", action="version", version=f"tqdiff {__version__}")
    parser.add_argument("--config", help="JSON config file with per-command sections")
    parser.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")

    phys = argparse.ArgumentParser(add_help=False)
    g = phys.add_argument_group("physical parameters")
    g.add_argument("--m", type=float, help="mass")
    g.add_argument("--b", type=float, help="friction coefficient")
    g.add_argument("--T", type=float, help="temperature")
    g.add_argument("--hbar", type=float)
    g.add_argument("--kB", type=float)
    g.add_argument("--omega0", type=float, help="oscillator frequency (0 = free)")

    def output_flag(sp):
        sp.add_argument("--output", help="file name inside the output directory")

    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("constants", parents=[phys], help="derived constants as JSON")

    sp = sub.add_parser("front", parents=[phys], help="quantum vs classical diffusion front")
    sp.add_argument("--tmax", type=float)
    sp.add_argument("--tmin", type=float)
    sp.add_argument("--points", type=int)
    output_flag(sp)

    sp = sub.add_parser("oscillator", parents=[phys], help="oscillator dispersion relaxation")
    sp.add_argument("--tmax", type=float)
    sp.add_argument("--points", type=int)
    sp.add_argument("--sigma2-0", dest="sigma2_0", type=float)
    output_flag(sp)

    sp = sub.add_parser("pde", parents=[phys], help="quantum Smoluchowski PDE from a Gaussian start")
    sp.add_argument("--model", choices=pde.MODELS)
    sp.add_argument("--n", type=int, help="grid points")
    sp.add_argument("--sigma2-0", dest="sigma2_0", type=float)
    sp.add_argument("--t-end", dest="t_end", type=float)
    sp.add_argument("--outputs", type=int, help="number of recorded times")
    sp.add_argument("--half-width", dest="half_width", type=float)
    sp.add_argument("--courant", type=float)
    output_flag(sp)

    sp = sub.add_parser("sde", parents=[phys], help="Langevin ensemble")
    sp.add_argument("--n-traj", dest="n_traj", type=int)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--t-end", dest="t_end", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--mode", choices=("overdamped", "underdamped"))
    sp.add_argument("--force", choices=("free", "external", "meanfield_quantum", "effective_spring", "time_dependent_spring"))
    sp.add_argument("--record-stride", dest="record_stride", type=int)
    sp.add_argument("--sigma2-0", dest="sigma2_0", type=float)
    sp.add_argument("--closure", choices=("bohm", "free_energy"))
    sp.add_argument("--spring-source", dest="spring_source", choices=("ensemble", "ode"))
    sp.add_argument("--record-trajectories", dest="record_trajectories", type=int)
    sp.add_argument("--burn-in", dest="burn_in", type=float)
    sp.add_argument("--moment-match", dest="moment_match", action="store_true", default=None)
    output_flag(sp)

    sp = sub.add_parser("spectrum", parents=[phys], help="ACF and PSD of a trajectory CSV")
    sp.add_argument("--input", help="trajectory CSV from the sde command")
    sp.add_argument("--max-lag", dest="max_lag", type=int)
    sp.add_argument("--segment-len", dest="segment_len", type=int)
    sp.add_argument("--overlap", type=float)

    sp = sub.add_parser("verify", help="run the cross-check matrix")
    tier = sp.add_mutually_exclusive_group()
    tier.add_argument("--quick", action="store_true", help="reduced sizes, about a minute (default)")
    tier.add_argument("--full", action="store_true", help="stated sizes, several minutes")
    sp.add_argument("--only", nargs="+", choices=list(verify.CHECKS), help="subset of checks")
    sp.add_argument("--report", help="JSON report path (default OUT/verify_report.json)")
    return parser


COMMANDS = {
    "constants": cmd_constants,
    "front": cmd_front,
    "oscillator": cmd_oscillator,
    "pde": cmd_pde,
    "sde": cmd_sde,
    "spectrum": cmd_spectrum,
    "verify": cmd_verify,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        return COMMANDS[args.command](args, config)
    except (ParameterError, DomainError, TypeError) as exc:
        print(f"tqdiff: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"tqdiff: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"tqdiff: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
