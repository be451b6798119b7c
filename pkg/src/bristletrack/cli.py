"""Command-line front end.

Subcommands: ``simulate`` (one scenario, trace + summary files),
``equilibrium`` (stationary point report), ``verify`` (structural
certification report), ``sweep`` (one scenario per value of a chosen
axis, aggregated CSV).  Exit codes: 0 success, 1 verification failure,
2 config error, 3 solver failure, 4 simulated divergence.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .analysis import certify
from .config import ConfigError, load_config, render_config
from .equilibrium import SolverError, solve_equilibrium
from .grid import Grid, build_kernels
from .observer import ObserverDesignError
from .params import build_matrices
from .sim import SimConfig, ValidationError, prepare, run_scenario

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_DIVERGED = 4


def _default_out() -> str:
    return os.environ.get("BRISTLETRACK_OUT", "bristletrack_out")


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest(out_dir, config_path, seed, artifacts):
    return {
        "config": os.path.abspath(config_path),
        "resolved_config": "resolved_config.ini",
        "seed": seed,
        "out_dir": os.path.abspath(out_dir),
        "artifacts": sorted(artifacts),
    }


def _load(args):
    try:
        body, axles, cfg, sweep = load_config(args.config)
    except FileNotFoundError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return body, axles, cfg, sweep


def cmd_simulate(args) -> int:
    body, axles, cfg, sweep = _load(args)
    scn = prepare(body, axles, cfg)   # validates before any output is created
    os.makedirs(args.out, exist_ok=True)
    trace = run_scenario(body, axles, cfg, scenario=scn)
    trace.to_csv(os.path.join(args.out, "trace.csv"))
    summary = trace.summary()
    _write_json(os.path.join(args.out, "summary.json"), summary)
    with open(os.path.join(args.out, "resolved_config.ini"), "w") as fh:
        fh.write(render_config(body, axles, cfg, sweep))
    artifacts = ["trace.csv", "summary.json", "resolved_config.ini", "manifest.json"]
    _write_json(os.path.join(args.out, "manifest.json"),
                _manifest(args.out, args.config, cfg.seed, artifacts))
    print(f"max norm {summary['max_norm']:.4g}, final norm {summary['final_norm']:.4g}, "
          f"diverged={summary['diverged']}")
    return EXIT_DIVERGED if summary["diverged"] else EXIT_OK


def cmd_equilibrium(args) -> int:
    body, axles, cfg, sweep = _load(args)
    mats = build_matrices(body, axles)
    grid = Grid(cfg.n_intervals)
    kernels = build_kernels(grid, mats)
    if cfg.u_star is not None:
        eq = solve_equilibrium(mats, kernels, grid, u_star=np.asarray(cfg.u_star))
    else:
        eq = solve_equilibrium(mats, kernels, grid, x_star=np.asarray(cfg.x_star))
    payload = {
        "x_star": [float(v) for v in eq.x_star],
        "u_star_rad": [float(v) for v in eq.u_star],
        "u_star_deg": [float(np.degrees(v)) for v in eq.u_star],
        "v_star": [float(v) for v in eq.v_star],
        "forces": [float(v) for v in eq.forces],
        "residual": float(eq.residual),
        "iterations": eq.iterations,
        "n_intervals": cfg.n_intervals,
    }
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "equilibrium.json"), payload)
    for key in ("x_star", "u_star_rad", "u_star_deg", "v_star", "forces"):
        print(f"{key:12s} = {payload[key]}")
    print(f"residual     = {payload['residual']:.3e}  ({eq.iterations} iterations)")
    return EXIT_OK


def cmd_verify(args) -> int:
    body, axles, cfg, sweep = _load(args)
    report = certify(body, axles, n_intervals=cfg.n_intervals, observer_p=cfg.p,
                     passivity_seed=cfg.seed, passivity_dt=cfg.dt)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "report.json"), "w") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    print(report.text())
    return EXIT_OK if report.all_pass else EXIT_VERIFY_FAIL


def _sweep_row(body, axles, cfg, sweep, axis, value):
    row = {"axis": axis, "value": value, "status": "ok"}
    try:
        if axis == "delay":
            cfg = dataclasses.replace(cfg, delay_u=float(value))
        elif axis == "ic_scale":
            base = sweep["ic_base"]
            cfg = dataclasses.replace(cfg, x0=(value * base[0], value * base[1]))
        elif axis == "observer_gain":
            cfg = dataclasses.replace(cfg, p=float(value))
        else:
            raise ConfigError(f"unknown sweep axis {axis!r}")
        trace = run_scenario(body, axles, cfg)
        s = trace.summary()
        diverged = s["diverged"] or s["max_norm"] > sweep["diverge_norm"]
        conv = trace.observer_convergence_time(
            0.05 * float(np.linalg.norm(np.asarray(cfg.x0) - np.asarray(cfg.x0_hat))))
        row.update(verdict=("diverged" if diverged else "stable"),
                   max_norm=s["max_norm"], final_norm=s["final_norm"],
                   max_x_norm_tail=s["max_x_norm_tail"],
                   max_steering_cmd_deg=max(s["max_steering_cmd_deg"]),
                   forces_tail_1=s["forces_tail_mean"][0],
                   forces_tail_2=s["forces_tail_mean"][1],
                   observer_convergence_time=conv, t_abort=s["t_abort"])
    except (ValidationError, SolverError, ObserverDesignError, FloatingPointError) as exc:
        row.update(status="error", error=str(exc), verdict="error")
    return row


def cmd_sweep(args) -> int:
    body, axles, cfg, sweep = _load(args)
    axis = args.axis or sweep["axis"]
    try:
        values = ([float(v) for v in args.values.split(",")] if args.values
                  else sweep["values"])
    except ValueError as exc:
        raise ConfigError(f"bad sweep values {args.values!r}: {exc}") from exc
    if axis not in ("delay", "ic_scale", "observer_gain"):
        raise ConfigError(f"unknown sweep axis {axis!r}")
    os.makedirs(args.out, exist_ok=True)
    with ThreadPoolExecutor(max_workers=min(len(values), os.cpu_count() or 1)) as pool:
        rows = list(pool.map(lambda v: _sweep_row(body, axles, cfg, sweep, axis, v),
                             values))
    fields = ["axis", "value", "status", "verdict", "max_norm", "final_norm",
              "max_x_norm_tail", "max_steering_cmd_deg", "forces_tail_1",
              "forces_tail_2", "observer_convergence_time", "t_abort", "error"]
    with open(os.path.join(args.out, "sweep.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for row in rows:
            w.writerow({k: row.get(k, "") for k in fields})
    for row in rows:
        print(f"{axis}={row['value']}: {row.get('verdict')}"
              + (f" (max_norm={row['max_norm']:.3g})" if "max_norm" in row else ""))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bristletrack",
                                 description="Distributed-friction single-track "
                                             "vehicle simulation and control")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in (("simulate", cmd_simulate), ("equilibrium", cmd_equilibrium),
                     ("verify", cmd_verify), ("sweep", cmd_sweep)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to INI config")
        p.add_argument("--out", default=_default_out(),
                       help="output directory (env BRISTLETRACK_OUT)")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.set_defaults(fn=fn)
    sweep_p = sub.choices["sweep"]
    sweep_p.add_argument("--axis", choices=("delay", "ic_scale", "observer_gain"),
                         default=None)
    sweep_p.add_argument("--values", default=None,
                         help="comma-separated values (default: [sweep] section)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, ObserverDesignError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
