"""Fixed-step simulation of the coupled plant, observer and controller.

One scenario = one call to :func:`run_scenario`.  The loop applies an
actuator delay to the commanded steering, refreshes zero-order-hold
measurement noise on its own sample clocks, integrates plant and
observer together with classical fourth-order Runge-Kutta (or explicit
Euler), and records a :class:`SimTrace`.  Runs are bit-reproducible for
a fixed config and seed: all noise samples are drawn up front from a
seeded generator.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import trapezoid

from . import _kernel
from .controller import ControllerGains, synthesize_gains
from .equilibrium import solve_equilibrium
from .grid import Grid, build_kernels
from .observer import (ObserverState, error_gram, error_weight, gain_l1,
                       observer_rhs)
from .params import (AxleTireParams, ModelMatrices, VehicleBodyParams,
                     build_matrices)
from .plant import PlantState, measure, ode_rhs, pde_rhs

# CFL limits for first-order upwind transport: explicit Euler is stable up
# to courant 1; classical RK4 up to ~1.39 on the imaginary-shifted circle,
# guarded here with a safety margin.
CFL_LIMIT = {"euler": 1.0, "rk4": 1.3}

MODES = {"open_loop": _kernel.OPEN_LOOP, "state_feedback": _kernel.STATE_FEEDBACK,
         "output_feedback": _kernel.OUTPUT_FEEDBACK}
SCRIPTED = 3


class ValidationError(ValueError):
    """A simulation config violates a structural or stability constraint."""


@dataclass(frozen=True)
class NoiseChannel:
    """Zero-mean Gaussian noise held constant between sample instants."""

    std: float
    sample_time: float

    def presample(self, rng: np.random.Generator, t_end: float, dt: float) -> np.ndarray:
        n_hold = steps_per(self.sample_time, dt)
        n_samples = int(math.ceil(t_end / dt)) // n_hold + 2
        if self.std == 0.0:
            return np.zeros(n_samples)
        return rng.normal(0.0, self.std, n_samples)


@dataclass
class DelayLine:
    """Ring buffer delaying a command stream by a whole number of steps."""

    n_steps: int
    fill: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        if self.n_steps < 0:
            raise ValidationError("delay must be non-negative")
        self._buf = [self.fill.copy() for _ in range(self.n_steps)]

    def push(self, u: np.ndarray) -> np.ndarray:
        """Insert the newest command; return the one delayed by n_steps."""
        if self.n_steps == 0:
            return np.asarray(u, float)
        self._buf.append(np.asarray(u, float).copy())
        return self._buf.pop(0)


def steps_per(interval: float, dt: float) -> int:
    """Round an interval to a whole number of steps (at least one)."""
    return max(1, int(round(interval / dt)))


@dataclass(frozen=True)
class SimConfig:
    """Everything a scenario needs besides the physical parameters."""

    t_end: float = 10.0
    dt: float = 2.5e-5
    scheme: str = "rk4"
    seed: int = 11
    mode: str = "output_feedback"
    delay_u: float = 0.0
    # measurement noise, one channel per measurement component
    noise_enabled: bool = False
    noise_std: tuple = (0.025, 0.005)
    noise_sample_time: tuple = (0.01, 0.005)
    # initial conditions
    x0: tuple = (0.0, 0.0)
    z0: tuple = (0.0, 0.0)            # constant per-axle deflection level
    # controller / equilibrium target
    q: float = 2.0
    x_star: tuple | None = (0.0, 0.0)
    u_star: tuple | None = None
    # observer
    observer_enabled: bool = True
    p: float = 2.0
    x0_hat: tuple = (0.0, 0.0)
    z0_hat: tuple = (0.0, 0.0)
    observer_input: str = "applied"   # "applied" or "commanded"
    # discretization and logging
    n_intervals: int = 50
    log_every: int = 0                # 0 = auto (~20k rows)
    z_frames: int = 400
    abort_norm: float = 1e6

    def __post_init__(self):
        if self.t_end <= 0 or self.dt <= 0:
            raise ValidationError("t_end and dt must be positive")
        if self.scheme not in CFL_LIMIT:
            raise ValidationError(f"unknown scheme {self.scheme!r}")
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.observer_input not in ("applied", "commanded"):
            raise ValidationError(f"unknown observer_input {self.observer_input!r}")
        if self.delay_u < 0:
            raise ValidationError("delay_u must be >= 0")
        if self.mode == "output_feedback" and not self.observer_enabled:
            raise ValidationError("output_feedback requires the observer")
        if self.z_frames < 1 or self.z_frames > 500:
            raise ValidationError("z_frames must lie in [1, 500]")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def validate_against(self, mats: ModelMatrices):
        """Reject configs that violate the transport stability bound."""
        grid = Grid(self.n_intervals)
        courant = self.dt * float(np.max(mats.transport)) / grid.dxi
        limit = CFL_LIMIT[self.scheme]
        if courant > limit:
            raise ValidationError(
                f"dt={self.dt:g} gives courant number {courant:.3f} > {limit} "
                f"for scheme {self.scheme!r}; reduce dt below "
                f"{limit * grid.dxi / float(np.max(mats.transport)):.3e}")


@dataclass
class SimTrace:
    """Time-indexed record of one scenario.

    Full-resolution series cover every step (post-step values at
    ``t = (k+1) dt``); state vectors are decimated by ``log_every`` and
    field snapshots by ``z_every``.
    """

    dt: float
    n_done: int
    diverged: bool
    t_abort: float | None
    log_every: int
    z_every: int
    delay_steps: int
    mode: str
    seed: int
    # full-resolution series
    norm: np.ndarray
    norm_x: np.ndarray
    norm_obs: np.ndarray
    storage: np.ndarray
    forces: np.ndarray
    u_cmd: np.ndarray
    u_applied: np.ndarray
    v_slip: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    v: np.ndarray
    v0: np.ndarray
    # decimated state series
    t_dec: np.ndarray
    x: np.ndarray
    x_hat: np.ndarray
    y_meas: np.ndarray
    # field snapshots
    t_z: np.ndarray
    z_frames: np.ndarray
    z_hat_frames: np.ndarray
    # initial conditions (t = 0 values, not part of the series)
    x0: np.ndarray = None
    z0_field: np.ndarray = None
    x0_hat: np.ndarray = None
    gains: ControllerGains = None

    @property
    def t(self) -> np.ndarray:
        return (np.arange(self.n_done) + 1) * self.dt

    def mask_after(self, t_start: float) -> np.ndarray:
        return self.t > t_start

    def forces_tail_mean(self, window: float = 2.0) -> np.ndarray:
        n = min(self.n_done, steps_per(window, self.dt))
        return self.forces[self.n_done - n:self.n_done].mean(axis=0)

    def max_norm(self) -> float:
        return float(self.norm.max())

    def first_time_norm_above(self, level: float) -> float | None:
        idx = np.nonzero(self.norm > level)[0]
        return float(self.t[idx[0]]) if idx.size else None

    def observer_error_norm(self) -> np.ndarray:
        """Lumped estimate error at the decimated instants."""
        return np.linalg.norm(self.x - self.x_hat, axis=1)

    def observer_convergence_time(self, level: float) -> float | None:
        """First decimated time after which the lumped error stays below level."""
        err = self.observer_error_norm()
        above = np.nonzero(err >= level)[0]
        if above.size == 0:
            return float(self.t_dec[0])
        if above[-1] == len(err) - 1:
            return None
        return float(self.t_dec[above[-1] + 1])

    def summary(self, tail_start: float = 3.0, force_window: float = 2.0) -> dict:
        t = self.t
        tail = t > tail_start
        imax = int(np.argmax(self.norm))
        out = {
            "mode": self.mode,
            "seed": self.seed,
            "dt": self.dt,
            "t_end_done": float(t[-1]) if self.n_done else 0.0,
            "diverged": bool(self.diverged),
            "t_abort": self.t_abort,
            "max_norm": float(self.norm.max()),
            "t_max_norm": float(t[imax]),
            "final_norm": float(self.norm[-1]),
            "max_x_norm": float(self.norm_x.max()),
            "max_x_norm_tail": float(self.norm_x[tail].max()) if tail.any() else None,
            "tail_start": tail_start,
            "max_steering_cmd_rad": [float(np.abs(self.u_cmd[:, j]).max()) for j in (0, 1)],
            "max_steering_cmd_deg": [float(np.degrees(np.abs(self.u_cmd[:, j]).max()))
                                     for j in (0, 1)],
            "forces_tail_mean": [float(v) for v in self.forces_tail_mean(force_window)],
            "force_window": force_window,
            "final_forces": [float(v) for v in self.forces[-1]],
            "observer_final_error": (float(np.linalg.norm(self.x[-1] - self.x_hat[-1]))
                                     if self.x.size else None),
            "observer_convergence_time": self.observer_convergence_time(
                0.05 * float(np.linalg.norm(self.x0 - self.x0_hat))
                if self.x0 is not None and np.linalg.norm(self.x0 - self.x0_hat) > 0
                else 0.05),
            "delay_steps": self.delay_steps,
            "log_every": self.log_every,
            "z_every": self.z_every,
        }
        return out

    def to_csv(self, path):
        """Write the decimated table; one row per logged instant."""
        cols = ["t", "x_vy", "x_r", "xhat_vy", "xhat_r", "y1", "y2",
                "norm", "norm_x", "norm_obs", "f1", "f2",
                "u_cmd1", "u_cmd2", "u_app1", "u_app2", "v_slip1", "v_slip2",
                "V1", "V2", "V", "V0", "storage"]
        idx = (np.arange(len(self.t_dec)) * self.log_every).clip(max=self.n_done - 1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r, k in enumerate(idx):
                w.writerow([repr(float(val)) for val in (
                    self.t_dec[r], self.x[r, 0], self.x[r, 1],
                    self.x_hat[r, 0], self.x_hat[r, 1],
                    self.y_meas[r, 0], self.y_meas[r, 1],
                    self.norm[k], self.norm_x[k], self.norm_obs[k],
                    self.forces[k, 0], self.forces[k, 1],
                    self.u_cmd[k, 0], self.u_cmd[k, 1],
                    self.u_applied[k, 0], self.u_applied[k, 1],
                    self.v_slip[k, 0], self.v_slip[k, 1],
                    self.v1[k], self.v2[k], self.v[k], self.v0[k], self.storage[k])])


@dataclass
class Scenario:
    """Prepared model objects shared by the kernel and the reference path."""

    body: VehicleBodyParams
    axles: tuple
    cfg: SimConfig
    mats: ModelMatrices
    grid: Grid
    kernels: object
    gains: ControllerGains
    l1: np.ndarray
    p_gram: np.ndarray
    kappa: float


def prepare(body: VehicleBodyParams, axles: tuple[AxleTireParams, AxleTireParams],
            cfg: SimConfig) -> Scenario:
    """Build grid, kernels, equilibrium, gains and observer data for a config."""
    mats = build_matrices(body, axles)
    cfg.validate_against(mats)
    grid = Grid(cfg.n_intervals)
    kernels = build_kernels(grid, mats)
    if cfg.u_star is not None:
        eq = solve_equilibrium(mats, kernels, grid, u_star=np.asarray(cfg.u_star, float))
    else:
        target = np.asarray(cfg.x_star if cfg.x_star is not None else (0.0, 0.0), float)
        eq = solve_equilibrium(mats, kernels, grid, x_star=target)
    gains = synthesize_gains(cfg.q, eq, mats, kernels, grid)
    l1 = gain_l1(cfg.p, mats)
    p_gram = error_gram(l1, mats)
    kappa = error_weight(p_gram, mats, kernels, grid, gains.omega_h)
    return Scenario(body=body, axles=axles, cfg=cfg, mats=mats, grid=grid,
                    kernels=kernels, gains=gains, l1=l1, p_gram=p_gram, kappa=kappa)


def initial_fields(scn: Scenario) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    cfg, grid = scn.cfg, scn.grid
    x0 = np.asarray(cfg.x0, float)
    z0 = grid.const_field(cfg.z0)
    xh0 = np.asarray(cfg.x0_hat, float)
    zh0 = grid.const_field(cfg.z0_hat)
    return x0, z0, xh0, zh0


def step(plant: PlantState, u_applied: np.ndarray, dt: float, mats: ModelMatrices,
         kernels, grid: Grid, scheme: str = "rk4",
         observer: ObserverState | None = None, y_noise: np.ndarray | None = None,
         u_observer: np.ndarray | None = None, l1: np.ndarray | None = None
         ) -> tuple[PlantState, ObserverState | None]:
    """One explicit step of the coupled plant (and observer, if given).

    Readable reference implementation used by tests and by the fallback
    path for velocity-dependent friction laws; the compiled kernel is
    pinned to agree with it.  Applied input and noise are held constant
    over the step; the measurement feeding the observer is evaluated at
    the plant stage states.
    """
    if not np.all(np.isfinite(plant.x)):
        raise FloatingPointError("non-finite plant state")
    u_applied = np.asarray(u_applied, float)
    noise = np.zeros(2) if y_noise is None else np.asarray(y_noise, float)

    def rhs(x, z, xh, zh):
        st = PlantState(x, z)
        dx = ode_rhs(st, u_applied, mats, kernels, grid)
        dz = pde_rhs(st, u_applied, mats, kernels, grid)
        if observer is None:
            return dx, dz, None, None
        y = measure(x, u_applied, mats).y + noise
        dxh, dzh = observer_rhs(ObserverState(xh, zh), y, u_observer, mats,
                                kernels, grid, l1)
        return dx, dz, dxh, dzh

    x, z = plant.x, plant.z
    xh = observer.x_hat if observer is not None else np.zeros(2)
    zh = observer.z_hat if observer is not None else np.zeros_like(z)

    if scheme == "euler":
        k1 = rhs(x, z, xh, zh)
        stages = (k1,)
        weights = (1.0,)
    else:
        k1 = rhs(x, z, xh, zh)
        k2 = rhs(x + 0.5 * dt * k1[0], z + 0.5 * dt * k1[1],
                 xh + (0.5 * dt * k1[2] if observer is not None else 0.0),
                 zh + (0.5 * dt * k1[3] if observer is not None else 0.0))
        k3 = rhs(x + 0.5 * dt * k2[0], z + 0.5 * dt * k2[1],
                 xh + (0.5 * dt * k2[2] if observer is not None else 0.0),
                 zh + (0.5 * dt * k2[3] if observer is not None else 0.0))
        k4 = rhs(x + dt * k3[0], z + dt * k3[1],
                 xh + (dt * k3[2] if observer is not None else 0.0),
                 zh + (dt * k3[3] if observer is not None else 0.0))
        stages = (k1, k2, k3, k4)
        weights = (1.0 / 6.0, 2.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0)

    x_new = x + dt * sum(w * s[0] for w, s in zip(weights, stages))
    z_new = z + dt * sum(w * s[1] for w, s in zip(weights, stages))
    z_new[:, 0] = 0.0
    new_plant = PlantState(x_new, z_new)
    new_obs = None
    if observer is not None:
        xh_new = xh + dt * sum(w * s[2] for w, s in zip(weights, stages))
        zh_new = zh + dt * sum(w * s[3] for w, s in zip(weights, stages))
        zh_new[:, 0] = 0.0
        new_obs = ObserverState(xh_new, zh_new)
    return new_plant, new_obs


def _mu_constants(axles) -> np.ndarray | None:
    vals = []
    for a in axles:
        if not a.mu_is_constant:
            return None
        vals.append(float(a.mu))
    return np.array(vals)


def _assemble_trace(scn: Scenario, out, log_every: int, z_every: int) -> SimTrace:
    cfg = scn.cfg
    (status, n_done, nrm, nrmx, nrmh, stor, f_log, u_cmd, u_app, v_log,
     v1_log, v2_log, v_lyap, v0_log,
     idec, idx_dec, x_dec, xh_dec, y_dec, iz, idx_z, z_snap, zh_snap) = out
    # trim decimated rows to completed steps
    keep = idx_dec[:idec] < n_done
    keep_z = idx_z[:iz] < n_done
    x0, z0, xh0, _ = initial_fields(scn)
    return SimTrace(
        dt=cfg.dt, n_done=n_done, diverged=bool(status == 1),
        t_abort=(float(n_done * cfg.dt) if status == 1 else None),
        log_every=log_every, z_every=z_every,
        delay_steps=steps_per(cfg.delay_u, cfg.dt) if cfg.delay_u > 0 else 0,
        mode=cfg.mode, seed=cfg.seed,
        norm=nrm[:n_done], norm_x=nrmx[:n_done], norm_obs=nrmh[:n_done],
        storage=stor[:n_done], forces=f_log[:n_done], u_cmd=u_cmd[:n_done],
        u_applied=u_app[:n_done], v_slip=v_log[:n_done],
        v1=v1_log[:n_done], v2=v2_log[:n_done], v=v_lyap[:n_done], v0=v0_log[:n_done],
        t_dec=(idx_dec[:idec][keep] + 1) * cfg.dt,
        x=x_dec[:idec][keep], x_hat=xh_dec[:idec][keep], y_meas=y_dec[:idec][keep],
        t_z=(idx_z[:iz][keep_z] + 1) * cfg.dt,
        z_frames=z_snap[:iz][keep_z], z_hat_frames=zh_snap[:iz][keep_z],
        x0=x0, z0_field=z0, x0_hat=xh0, gains=scn.gains)


def _noise_arrays(cfg: SimConfig, rng: np.random.Generator):
    ch1 = NoiseChannel(cfg.noise_std[0] if cfg.noise_enabled else 0.0,
                       cfg.noise_sample_time[0])
    ch2 = NoiseChannel(cfg.noise_std[1] if cfg.noise_enabled else 0.0,
                       cfg.noise_sample_time[1])
    n1 = ch1.presample(rng, cfg.t_end, cfg.dt)
    n2 = ch2.presample(rng, cfg.t_end, cfg.dt)
    return n1, n2, steps_per(cfg.noise_sample_time[0], cfg.dt), \
        steps_per(cfg.noise_sample_time[1], cfg.dt)


def run_scenario(body: VehicleBodyParams, axles: tuple, cfg: SimConfig,
                 u_script: np.ndarray | None = None,
                 scenario: Scenario | None = None) -> SimTrace:
    """Simulate one scenario and return its trace.

    ``u_script`` (shape ``(n_steps, 2)``) overrides the controller with a
    prescribed commanded-steering sequence; used by the certification
    trials.  Deterministic for fixed config and seed.
    """
    scn = scenario or prepare(body, axles, cfg)
    nst = cfg.n_steps
    rng = np.random.default_rng(cfg.seed)
    n1, n2, k1s, k2s = _noise_arrays(cfg, rng)
    log_every = cfg.log_every if cfg.log_every > 0 else max(1, nst // 20000)
    z_every = max(1, nst // cfg.z_frames)
    d_steps = steps_per(cfg.delay_u, cfg.dt) if cfg.delay_u > 0 else 0
    x0, z0, xh0, zh0 = initial_fields(scn)
    eq = scn.gains.equilibrium

    if u_script is not None:
        mode_code = SCRIPTED
        script = np.asarray(u_script, float)
        if script.shape != (nst, 2):
            raise ValidationError(f"u_script must have shape ({nst}, 2)")
    else:
        mode_code = MODES[cfg.mode]
        script = np.zeros((1, 2))

    mu_c = _mu_constants(axles)
    with_obs = 1 if (cfg.observer_enabled and mode_code != SCRIPTED) else 0
    args = (nst, cfg.dt, scn.grid.n_nodes, scn.grid.dxi,
            1 if cfg.scheme == "rk4" else 0, mode_code, with_obs,
            1 if cfg.observer_input == "applied" else 0,
            scn.mats.drift, scn.mats.slip_map, scn.mats.force_gain, scn.mats.steer_gain,
            scn.mats.deflection_gain, scn.mats.transport, scn.mats.wind,
            scn.kernels.w_force, scn.kernels.w_coupling, scn.kernels.w_gradient,
            scn.kernels.edge, np.array([a.stiffness for a in axles]),
            (mu_c if mu_c is not None else np.ones(2)), body.theta, body.eps,
            scn.kernels.storage, scn.grid.weights,
            eq.u_star, eq.x_star, eq.z_star, scn.gains.kx, scn.gains.kz_nodes,
            scn.gains.m_prof, scn.gains.virtual_gain, scn.gains.gamma1,
            scn.l1, scn.p_gram, scn.kappa,
            d_steps, n1, n2, k1s, k2s,
            x0, z0, xh0, zh0, log_every, z_every, cfg.abort_norm, script)

    if mu_c is not None:
        out = _kernel.run_loop(*args)
    else:
        out = _python_loop(scn, *args)
    return _assemble_trace(scn, out, log_every, z_every)


def _python_loop(scn: Scenario, nst, dt, n, dxi, scheme, mode, with_obs, obs_applied,
                 a1, a2, g1, g2, hd, lam, bv, w1, w2, w3, k4, sig, muc, theta, eps,
                 qd, wq, ustar, xstar, zstar, kx, kzn, mprof, pvw, gam1,
                 l1m, pgram, kappa, d_steps, n1, n2, k1s, k2s,
                 x0, z0, xh0, zh0, log_every, z_every, abort_norm, script):
    """Reference loop built on :func:`step`; handles velocity-dependent friction."""
    from .analysis import lyapunov_v1, lyapunov_v2, storage_value
    from .controller import collapsed_feedback
    from .grid import force_functional
    from .observer import error_functional
    from .params import rel_velocity

    cfg, mats, kernels, grid = scn.cfg, scn.mats, scn.kernels, scn.grid
    plant = PlantState(x0.copy(), z0.copy())
    obs = ObserverState(xh0.copy(), zh0.copy()) if with_obs else None

    u_cmd = np.zeros((nst, 2)); u_app = np.zeros((nst, 2))
    f_log = np.zeros((nst, 2)); v_log = np.zeros((nst, 2))
    nrm = np.zeros(nst); nrmx = np.zeros(nst); nrmh = np.zeros(nst)
    stor = np.zeros(nst); v1_log = np.zeros(nst); v2_log = np.zeros(nst)
    v_lyap = np.zeros(nst); v0_log = np.zeros(nst)
    ndec = nst // log_every + 1
    x_dec = np.zeros((ndec, 2)); xh_dec = np.zeros((ndec, 2)); y_dec = np.zeros((ndec, 2))
    idx_dec = np.zeros(ndec, dtype=np.int64)
    nz = nst // z_every + 1
    z_snap = np.zeros((nz, 2, n)); zh_snap = np.zeros((nz, 2, n))
    idx_z = np.zeros(nz, dtype=np.int64)
    status, n_done, idec, iz = 0, nst, 0, 0

    for kk in range(nst):
        if mode == SCRIPTED:
            uc = script[kk].copy()
        elif mode == _kernel.OPEN_LOOP:
            uc = np.zeros(2)
        elif mode == _kernel.STATE_FEEDBACK:
            uc = collapsed_feedback(plant.x, plant.z, scn.gains)
        else:
            uc = collapsed_feedback(obs.x_hat, obs.z_hat, scn.gains)
        u_cmd[kk] = uc
        ua = u_cmd[kk - d_steps] if kk >= d_steps else np.zeros(2)
        u_app[kk] = ua
        noise = np.array([n1[kk // k1s], n2[kk // k2s]])
        u_obs = ua if obs_applied else uc
        try:
            plant, obs = step(plant, ua, dt, mats, kernels, grid,
                              scheme=cfg.scheme, observer=obs, y_noise=noise,
                              u_observer=u_obs, l1=l1m)
        except FloatingPointError:
            status, n_done = 1, kk + 1
            break
        nrmx[kk] = float(np.linalg.norm(plant.x))
        nrm[kk] = math.sqrt(nrmx[kk] ** 2 + grid.l2_norm(plant.z) ** 2)
        stor[kk] = storage_value(plant.z, grid, kernels)
        if obs is not None:
            nrmh[kk] = math.sqrt(float(np.linalg.norm(obs.x_hat)) ** 2
                                 + grid.l2_norm(obs.z_hat) ** 2)
        f_log[kk] = force_functional(plant.z, kernels, grid)
        v_log[kk] = rel_velocity(plant.x, ua, mats)
        xd = plant.x - xstar
        v1_log[kk] = lyapunov_v1(xd)
        pi = pvw @ xd
        zeta = (plant.z - zstar) - np.einsum('kij,j->ik', mprof, pi)
        v2_log[kk] = lyapunov_v2(zeta, grid, kernels)
        v_lyap[kk] = v1_log[kk] + v2_log[kk] / gam1
        if obs is not None:
            v0_log[kk] = error_functional(plant.x - obs.x_hat, plant.z - obs.z_hat,
                                          pgram, kappa, kernels, grid)
        if kk % log_every == 0:
            idx_dec[idec] = kk
            x_dec[idec] = plant.x
            xh_dec[idec] = obs.x_hat if obs is not None else 0.0
            y_dec[idec] = hd * v_log[kk] + noise
            idec += 1
        if kk % z_every == 0:
            idx_z[iz] = kk
            z_snap[iz] = plant.z
            if obs is not None:
                zh_snap[iz] = obs.z_hat
            iz += 1
        if not np.isfinite(nrm[kk]) or (obs is not None and not np.isfinite(nrmh[kk])) \
                or nrm[kk] > abort_norm:
            status, n_done = 1, kk + 1
            break
    return (status, n_done, nrm, nrmx, nrmh, stor, f_log, u_cmd, u_app, v_log,
            v1_log, v2_log, v_lyap, v0_log, idec, idx_dec, x_dec, xh_dec, y_dec,
            iz, idx_z, z_snap, zh_snap)


def passivity_residuals(body: VehicleBodyParams, axles: tuple, n_intervals: int = 50,
                        n_trials: int = 100, seed: int = 0, dt: float = 2.5e-5,
                        t_end: float = 0.08) -> tuple[np.ndarray, float]:
    """Cumulative passivity balance of the patch over random open-loop runs.

    For each seeded trial the supplied-energy integral of the tire force
    against the slip velocity must dominate the storage increment plus
    the dissipation margin times the field energy integral; returns the
    per-trial residuals of that inequality and the tolerance
    ``C (dt + dxi)`` with C taken from the largest supply rate seen.
    """
    from .analysis import dissipativity_constant, storage_value

    rng = np.random.default_rng(seed)
    base = SimConfig(t_end=t_end, dt=dt, mode="open_loop", observer_enabled=False,
                     noise_enabled=False, n_intervals=n_intervals, log_every=1,
                     seed=seed)
    residuals = np.zeros(n_trials)
    c_max = 1.0
    scn = None
    nst = base.n_steps
    switch = steps_per(0.02, dt)
    for trial in range(n_trials):
        x0 = rng.uniform(-1.0, 1.0, 2)
        z_level = rng.uniform(-0.003, 0.003, 2)
        cfg = replace(base, x0=tuple(x0), z0=tuple(z_level), seed=seed + trial)
        n_blocks = nst // switch + 1
        u_blocks = rng.uniform(-0.02, 0.02, (n_blocks, 2))
        script = np.repeat(u_blocks, switch, axis=0)[:nst]
        if scn is None:
            scn = prepare(body, axles, cfg)
        else:
            scn = Scenario(body=body, axles=axles, cfg=cfg, mats=scn.mats,
                           grid=scn.grid, kernels=scn.kernels, gains=scn.gains,
                           l1=scn.l1, p_gram=scn.p_gram, kappa=scn.kappa)
        trace = run_scenario(body, axles, cfg, u_script=script, scenario=scn)
        omega = scn.gains.omega_h
        z0f = scn.grid.const_field(z_level)
        # prepend the initial instant to the post-step series
        f0 = np.sum(scn.kernels.w_force * z0f, axis=1)
        v0 = scn.mats.slip_map @ x0 + scn.mats.steer_gain @ script[0]
        supply = np.concatenate([[f0 @ v0], np.sum(trace.forces * trace.v_slip, axis=1)])
        zsq = np.concatenate([[scn.grid.l2_norm(z0f) ** 2],
                              trace.norm ** 2 - trace.norm_x ** 2])
        tgrid = np.concatenate([[0.0], trace.t])
        stor0 = storage_value(z0f, scn.grid, scn.kernels)
        d_storage = trace.storage[-1] - stor0
        residuals[trial] = (trapezoid(supply, tgrid) - d_storage
                            - omega * trapezoid(zsq, tgrid))
        c_max = max(c_max, float(np.abs(supply).max()))
    tol = c_max * (dt + scn.grid.dxi)
    return residuals, tol
