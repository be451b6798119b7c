"""Lyapunov functionals, norms, and numerical certification.

The certification suite checks, on the chosen grid, the structural
properties the control design leans on: strict dissipativity of the
transport operator in the storage-weighted inner product, preservation
of that margin under the frozen friction source, the unit normalization
of the virtual-law profile, stationarity of the solved equilibrium,
a Hurwitz observer error matrix, a global Lipschitz constant for the
friction source, and a trajectory-based passivity balance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .grid import Grid, KernelSet, axle_transport_block, build_kernels, force_functional
from .params import AxleTireParams, ModelMatrices, VehicleBodyParams, sigma_matrix
from .equilibrium import m_profile, solve_equilibrium


def lyapunov_v1(x_delta: np.ndarray) -> float:
    """Quadratic energy of the lumped-state deviation."""
    x = np.asarray(x_delta, float)
    return 0.5 * float(x @ x)


def lyapunov_v2(zeta: np.ndarray, grid: Grid, kernels: KernelSet) -> float:
    """Storage-weighted quadratic energy of a deflection field."""
    return 0.5 * float(np.sum(grid.weights * np.sum(kernels.storage * zeta * zeta, axis=0)))


def storage_value(z: np.ndarray, grid: Grid, kernels: KernelSet) -> float:
    """Storage function of the patch subsystem (same weight as lyapunov_v2)."""
    return lyapunov_v2(z, grid, kernels)


def composite_v(x_delta: np.ndarray, zeta: np.ndarray, gamma1: float, grid: Grid,
                kernels: KernelSet, v0: float | None = None,
                gamma0: float | None = None) -> float:
    """Composite Lyapunov value; adds the observer part when ``v0`` is given."""
    val = lyapunov_v1(x_delta) + lyapunov_v2(zeta, grid, kernels) / gamma1
    if v0 is not None:
        if gamma0 is None:
            raise ValueError("gamma0 required when v0 is given")
        val += gamma0 * v0
    return val


def state_norm(x: np.ndarray, z: np.ndarray, grid: Grid) -> float:
    """Norm of the coupled state: sqrt(|X|^2 + L2 norm of the field squared)."""
    x = np.asarray(x, float)
    return float(np.sqrt(x @ x + grid.l2_norm(z) ** 2))


def output_feedback_weights(gains, l1: np.ndarray, mats: ModelMatrices,
                            kernels: KernelSet, grid: Grid) -> dict:
    """Numeric stand-ins for the output-feedback composite energy weight.

    The cross-term constant and the observer decay rate are existence
    objects in the underlying analysis; here both are replaced by
    computable norm-product bounds (conservative, reported as such):
    the decay rate from the error Gram and the field margin, the
    cross-term constant from operator norms of the feedback pieces.
    Returns gamma0 together with the intermediate estimates.
    """
    from .observer import error_gram, error_weight

    p_gram = error_gram(l1, mats)
    kappa = error_weight(p_gram, mats, kernels, grid, gains.omega_h)
    lam_q_max = float(kernels.storage.max())
    lam_q_min = float(kernels.storage.min())
    lam_p_min = float(np.linalg.eigvalsh(p_gram).min())
    rho = min(1.0 / float(np.linalg.eigvalsh(p_gram).max()),
              gains.omega_h / lam_q_max)
    gamma2 = min(gains.q, gains.omega_h / lam_q_max)

    g1_inv = np.linalg.inv(mats.force_gain)
    cc = (g1_inv @ gains.a1_star @ mats.force_gain).T
    k_op = max(np.sqrt(np.sum(grid.weights * kernels.force[i] ** 2)) for i in range(2))
    z_of_v = k_op * np.sqrt(2.0 * gains.gamma1 / lam_q_min)
    lumped_path = (np.linalg.norm(mats.slip_map - gains.psi_inv @ gains.virtual_gain, 2)
                   + gains.gamma1 * np.linalg.norm(mats.force_gain, 2)
                   + np.linalg.norm(cc @ gains.sm @ gains.virtual_gain, 2))
    field_path = np.linalg.norm(cc, 2) * gains.mq_inf
    eta0 = z_of_v * (lumped_path * np.sqrt(2.0 / lam_p_min)
                     + field_path * np.sqrt(2.0 / (kappa * lam_q_min)))
    eps = eta0 ** 2 / (gains.gamma1 * gamma2)
    gamma0 = 2.0 * eps / (rho * gains.gamma1)
    return {"gamma0": float(gamma0), "rho": float(rho), "gamma2": float(gamma2),
            "eta0_bound": float(eta0), "kappa": float(kappa)}


def dissipativity_constant(kernels: KernelSet, grid: Grid, mats: ModelMatrices) -> float:
    """Strict dissipativity margin of the discrete transport operator.

    Returns the largest omega such that the storage-weighted quadratic
    form of the operator is bounded by ``-omega`` times the plain L2
    norm, over all fields vanishing at the inlet.  Computed per axle as
    minus the top eigenvalue of the weighted symmetric part against the
    quadrature mass matrix.
    """
    omegas = []
    for i in range(2):
        blk = axle_transport_block(i, kernels, grid, mats)
        d = grid.weights[1:] * kernels.storage[i, 1:]
        s = 0.5 * (blk.T * d[None, :] + d[:, None] * blk)
        ev = sla.eigh(s, np.diag(grid.weights[1:]), eigvals_only=True)
        omegas.append(-float(ev.max()))
    return min(omegas)


def source_dissipativity_margin(y: np.ndarray, kernels: KernelSet, grid: Grid,
                                mats: ModelMatrices) -> float:
    """Dissipativity margin with the friction source frozen at slip ``y``."""
    s_diag = mats.body.theta * np.diag(sigma_matrix(np.asarray(y, float), mats.axles,
                                                    mats.body.eps))
    omegas = []
    nf = grid.n_nodes - 1
    for i in range(2):
        blk = axle_transport_block(i, kernels, grid, mats)
        blk = blk + s_diag[i] * (np.eye(nf) + np.tile(kernels.w_coupling[i, 1:], (nf, 1)))
        d = grid.weights[1:] * kernels.storage[i, 1:]
        s = 0.5 * (blk.T * d[None, :] + d[:, None] * blk)
        ev = sla.eigh(s, np.diag(grid.weights[1:]), eigvals_only=True)
        omegas.append(-float(ev.max()))
    return min(omegas)


def sigma_lipschitz(axles, eps: float, v_max: float = 5.0, n: int = 81) -> tuple[float, float]:
    """Empirical and closed-form Lipschitz constants of the friction source.

    Samples slip pairs on a grid and returns (empirical, bound) where the
    bound ``max(stiffness)/mu_min`` holds for constant friction laws.
    """
    vs = np.linspace(-v_max, v_max, n)
    emp = 0.0
    for i, v1 in enumerate(vs):
        s1 = sigma_matrix(np.array([v1, v1]), axles, eps)
        for v2 in vs[i + 1:]:
            s2 = sigma_matrix(np.array([v2, v2]), axles, eps)
            emp = max(emp, np.linalg.norm(s1 - s2, 2) / abs(v1 - v2))
    mu_min = min(a.mu_value(0.0) if a.mu_is_constant else
                 min(a.mu_value(v) for v in vs) for a in axles)
    bound = max(a.stiffness for a in axles) / mu_min
    return emp, bound


@dataclass
class CertificationReport:
    """Numeric margins and pass/fail verdicts of the structural checks."""

    omega_h: float
    source_margin_min: float
    passivity_residual_min: float
    passivity_tolerance: float
    lemma_norm_error: float
    equilibrium_residual: float
    hurwitz_margin: float
    l_sigma_emp: float
    l_sigma_bound: float
    n_intervals: int
    verdicts: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(bool(v) for v in self.verdicts.values())

    def to_dict(self) -> dict:
        d = {k: (v if isinstance(v, int) and not isinstance(v, bool) else float(v))
             for k, v in self.__dict__.items() if k != "verdicts"}
        d["verdicts"] = {k: bool(v) for k, v in self.verdicts.items()}
        d["all_pass"] = self.all_pass
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, **kw)

    def text(self) -> str:
        lines = [
            f"dissipativity margin omega_h      : {self.omega_h:.6g}",
            f"frozen-source margin (min over y) : {self.source_margin_min:.6g}",
            f"passivity residual (min of trials): {self.passivity_residual_min:.6g}"
            f"  (tol -{self.passivity_tolerance:.3g})",
            f"profile normalization error       : {self.lemma_norm_error:.3g}",
            f"equilibrium residual (relative)   : {self.equilibrium_residual:.3g}",
            f"observer Hurwitz margin           : {self.hurwitz_margin:.6g}",
            f"source Lipschitz (emp / bound)    : {self.l_sigma_emp:.6g} / {self.l_sigma_bound:.6g}",
        ]
        for name, ok in self.verdicts.items():
            lines.append(f"[{'PASS' if ok else 'FAIL'}] {name}")
        return "\n".join(lines)


def certify(body: VehicleBodyParams, axles: tuple[AxleTireParams, AxleTireParams],
            n_intervals: int = 50, observer_p: float = 2.0,
            passivity_trials: int = 100, passivity_seed: int = 0,
            passivity_dt: float = 2.5e-5) -> CertificationReport:
    """Run the full structural certification at the given grid resolution."""
    from .params import build_matrices
    from .observer import gain_l1
    from .sim import passivity_residuals

    mats = build_matrices(body, axles)
    grid = Grid(n_intervals)
    kernels = build_kernels(grid, mats)

    omega_h = dissipativity_constant(kernels, grid, mats)

    y_samples = [np.array([a, b]) for a in (-5.0, -0.5, 0.0, 0.5, 5.0)
                 for b in (-5.0, -0.5, 0.0, 0.5, 5.0)]
    margins = [source_dissipativity_margin(y, kernels, grid, mats) for y in y_samples]
    source_margin = min(margins)

    # downstream checks presuppose the margin; report them as failed rather
    # than raising when the operator is not dissipative
    from .equilibrium import SolverError
    try:
        eq = solve_equilibrium(mats, kernels, grid, x_star=np.zeros(2))
        m = m_profile(eq.v_star, kernels, grid, mats)
        km = np.einsum('k,ik,kij->ij', grid.weights, kernels.force, m)
        lemma_err = float(np.abs(km - np.eye(2)).max())
        eq_residual = eq.residual
    except SolverError:
        lemma_err = float("inf")
        eq_residual = float("inf")

    from .observer import ObserverDesignError
    try:
        l1 = gain_l1(observer_p, mats)
        abar = mats.drift + l1 @ mats.deflection_gain_matrix @ mats.slip_map
        hurwitz_margin = -float(np.max(np.linalg.eigvals(abar).real))
    except ObserverDesignError:
        hurwitz_margin = float("-inf")

    l_emp, l_bound = sigma_lipschitz(mats.axles, body.eps)

    if omega_h > 0.0:
        residuals, ptol = passivity_residuals(body, axles, n_intervals=n_intervals,
                                              n_trials=passivity_trials,
                                              seed=passivity_seed, dt=passivity_dt)
        pres_min = float(np.min(residuals))
    else:
        pres_min, ptol = float("-inf"), 0.0

    verdicts = {
        "strict_dissipativity": omega_h > 0.0,
        "source_preserves_dissipativity": source_margin >= omega_h * (1.0 - 1e-9),
        "profile_normalization": lemma_err <= max(1e-3, 10.0 / n_intervals ** 2),
        "equilibrium_stationarity": eq_residual < 1e-8,
        "observer_hurwitz": hurwitz_margin > 0.0,
        "source_lipschitz": l_emp <= l_bound * (1.0 + 1e-9),
        "trajectory_passivity": pres_min >= -ptol,
    }
    return CertificationReport(
        omega_h=omega_h, source_margin_min=source_margin,
        passivity_residual_min=pres_min, passivity_tolerance=ptol,
        lemma_norm_error=lemma_err, equilibrium_residual=eq_residual,
        hurwitz_margin=hurwitz_margin, l_sigma_emp=l_emp, l_sigma_bound=l_bound,
        n_intervals=n_intervals, verdicts=verdicts)
