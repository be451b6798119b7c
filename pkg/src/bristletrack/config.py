"""Flat sectioned plain-text configuration files.

Standard INI syntax (configparser), no nesting.  Every runtime knob has
a default; :func:`render_config` emits the fully resolved file in a
canonical form, so the echo written next to each run's outputs is a
byte-reproducible input for reruns.
"""

from __future__ import annotations

import configparser
import io

import numpy as np

from .params import AxleTireParams, VehicleBodyParams
from .sim import SimConfig


class ConfigError(ValueError):
    """Malformed configuration; message carries section/key context."""


_VEHICLE_KEYS = {
    "mass": 1300.0, "yaw_inertia": 2000.0, "dist_front": 1.4, "dist_rear": 1.0,
    "speed": 50.0, "wind_force": -500.0, "wind_offset": -0.3, "theta": 1.0,
    "eps": 0.0,
}
_AXLE_KEYS = {
    "axle1": {"patch_len": 0.11, "stiffness": 240.0, "shape_a": 0.1, "fz": 2660.0,
              "carcass_phi": 0.92, "carcass_psi": 0.08, "mu": 1.0},
    "axle2": {"patch_len": 0.09, "stiffness": 269.0, "shape_a": 0.1, "fz": 3720.0,
              "carcass_phi": 0.92, "carcass_psi": 0.08, "mu": 1.0},
}
_SIM_KEYS = {
    "t_end": 10.0, "dt": 2.5e-5, "scheme": "rk4", "seed": 11,
    "mode": "output_feedback", "delay_u": 0.2, "n_intervals": 50,
    "x0": "1.5 -0.25", "z0": "0.003 0.003", "abort_norm": 1e6,
    "log_every": 0, "z_frames": 400,
}
_CONTROLLER_KEYS = {"q": 2.0, "x_star": "0 0", "u_star": ""}
_OBSERVER_KEYS = {"enabled": True, "p": 2.0, "x0_hat": "0 0", "z0_hat": "0 0",
                  "input": "applied"}
_NOISE_KEYS = {"enabled": True, "std": "0.025 0.005", "sample_time": "0.01 0.005"}
_SWEEP_KEYS = {"axis": "delay", "values": "0.2 0.6 1.0", "diverge_norm": 10.0,
               "ic_base": "-0.3 0.05"}

_SCHEMA = {
    "vehicle": _VEHICLE_KEYS,
    "axle1": _AXLE_KEYS["axle1"],
    "axle2": _AXLE_KEYS["axle2"],
    "sim": _SIM_KEYS,
    "controller": _CONTROLLER_KEYS,
    "observer": _OBSERVER_KEYS,
    "noise": _NOISE_KEYS,
    "sweep": _SWEEP_KEYS,
}


def _pair(text: str, where: str) -> tuple[float, float]:
    parts = str(text).split()
    if len(parts) != 2:
        raise ConfigError(f"{where}: expected two numbers, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _coerce(raw: str, default, where: str):
    if isinstance(default, bool):
        low = str(raw).strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{where}: expected boolean, got {raw!r}")
    if isinstance(default, int) and not isinstance(default, bool):
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{where}: expected integer, got {raw!r}") from exc
    if isinstance(default, float):
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{where}: expected number, got {raw!r}") from exc
    return str(raw).strip()


def _read(parser: configparser.ConfigParser) -> dict:
    values = {sec: dict(defaults) for sec, defaults in _SCHEMA.items()}
    for sec in parser.sections():
        if sec not in _SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in parser.items(sec):
            if key not in _SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in section [{sec}]")
            values[sec][key] = _coerce(raw, _SCHEMA[sec][key], f"[{sec}] {key}")
    return values


def parse_config(text: str):
    """Parse configuration text into model parameters and a sim config.

    Returns ``(body, axles, sim_config, sweep_dict)``.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"syntax error: {exc}") from exc
    values = _read(parser)

    veh = values["vehicle"]
    try:
        body = VehicleBodyParams(mass=veh["mass"], yaw_inertia=veh["yaw_inertia"],
                                 dist_front=veh["dist_front"], dist_rear=veh["dist_rear"],
                                 speed=veh["speed"], wind_force=veh["wind_force"],
                                 wind_offset=veh["wind_offset"], theta=veh["theta"],
                                 eps=veh["eps"])
        axles = tuple(AxleTireParams(patch_len=ax["patch_len"], stiffness=ax["stiffness"],
                                     shape_a=ax["shape_a"], fz=ax["fz"],
                                     carcass_phi=ax["carcass_phi"],
                                     carcass_psi=ax["carcass_psi"], mu=ax["mu"])
                      for ax in (values["axle1"], values["axle2"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    sim, ctl, obs, noi = values["sim"], values["controller"], values["observer"], values["noise"]
    u_star = ctl["u_star"].strip()
    x_star = ctl["x_star"].strip()
    if u_star and x_star:
        raise ConfigError("[controller]: give either x_star or u_star, not both")
    try:
        cfg = SimConfig(
            t_end=sim["t_end"], dt=sim["dt"], scheme=sim["scheme"], seed=sim["seed"],
            mode=sim["mode"], delay_u=sim["delay_u"],
            noise_enabled=noi["enabled"],
            noise_std=_pair(noi["std"], "[noise] std"),
            noise_sample_time=_pair(noi["sample_time"], "[noise] sample_time"),
            x0=_pair(sim["x0"], "[sim] x0"), z0=_pair(sim["z0"], "[sim] z0"),
            q=ctl["q"],
            x_star=(None if u_star else _pair(x_star, "[controller] x_star")),
            u_star=(_pair(u_star, "[controller] u_star") if u_star else None),
            observer_enabled=obs["enabled"], p=obs["p"],
            x0_hat=_pair(obs["x0_hat"], "[observer] x0_hat"),
            z0_hat=_pair(obs["z0_hat"], "[observer] z0_hat"),
            observer_input=obs["input"],
            n_intervals=sim["n_intervals"], log_every=sim["log_every"],
            z_frames=sim["z_frames"], abort_norm=sim["abort_norm"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    sweep = dict(values["sweep"])
    sweep["values"] = [float(v) for v in str(sweep["values"]).split()]
    sweep["ic_base"] = _pair(sweep["ic_base"], "[sweep] ic_base")
    return body, axles, cfg, sweep


def load_config(path):
    with open(path, "r") as fh:
        return parse_config(fh.read())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_config(body: VehicleBodyParams, axles, cfg: SimConfig, sweep: dict) -> str:
    """Canonical fully-resolved configuration text (stable byte-for-byte)."""
    out = io.StringIO()

    def section(name, pairs):
        out.write(f"[{name}]\n")
        for k, v in pairs:
            out.write(f"{k} = {_fmt(v)}\n")
        out.write("\n")

    section("vehicle", [("mass", body.mass), ("yaw_inertia", body.yaw_inertia),
                        ("dist_front", body.dist_front), ("dist_rear", body.dist_rear),
                        ("speed", body.speed), ("wind_force", body.wind_force),
                        ("wind_offset", body.wind_offset), ("theta", body.theta),
                        ("eps", body.eps)])
    for name, ax in zip(("axle1", "axle2"), axles):
        mu = ax.mu if ax.mu_is_constant else "<callable>"
        section(name, [("patch_len", ax.patch_len), ("stiffness", ax.stiffness),
                       ("shape_a", ax.shape_a), ("fz", ax.fz),
                       ("carcass_phi", ax.carcass_phi), ("carcass_psi", ax.carcass_psi),
                       ("mu", mu)])
    section("sim", [("t_end", cfg.t_end), ("dt", cfg.dt), ("scheme", cfg.scheme),
                    ("seed", cfg.seed), ("mode", cfg.mode), ("delay_u", cfg.delay_u),
                    ("n_intervals", cfg.n_intervals),
                    ("x0", f"{_fmt(cfg.x0[0])} {_fmt(cfg.x0[1])}"),
                    ("z0", f"{_fmt(cfg.z0[0])} {_fmt(cfg.z0[1])}"),
                    ("abort_norm", cfg.abort_norm), ("log_every", cfg.log_every),
                    ("z_frames", cfg.z_frames)])
    ctl = [("q", cfg.q)]
    if cfg.u_star is not None:
        ctl.append(("u_star", f"{_fmt(cfg.u_star[0])} {_fmt(cfg.u_star[1])}"))
    else:
        ctl.append(("x_star", f"{_fmt(cfg.x_star[0])} {_fmt(cfg.x_star[1])}"))
    section("controller", ctl)
    section("observer", [("enabled", cfg.observer_enabled), ("p", cfg.p),
                         ("x0_hat", f"{_fmt(cfg.x0_hat[0])} {_fmt(cfg.x0_hat[1])}"),
                         ("z0_hat", f"{_fmt(cfg.z0_hat[0])} {_fmt(cfg.z0_hat[1])}"),
                         ("input", cfg.observer_input)])
    section("noise", [("enabled", cfg.noise_enabled),
                      ("std", f"{_fmt(cfg.noise_std[0])} {_fmt(cfg.noise_std[1])}"),
                      ("sample_time", f"{_fmt(cfg.noise_sample_time[0])} "
                                      f"{_fmt(cfg.noise_sample_time[1])}")])
    section("sweep", [("axis", sweep.get("axis", "delay")),
                      ("values", " ".join(_fmt(v) for v in sweep.get("values", []))),
                      ("diverge_norm", sweep.get("diverge_norm", 10.0)),
                      ("ic_base", f"{_fmt(sweep['ic_base'][0])} {_fmt(sweep['ic_base'][1])}")])
    return out.getvalue()
