"""Stationary solutions and the inverse of the source-augmented operator.

The stationary problem reduces to a two-dimensional root find in the
steady slip velocity: at a stationary point the force functional equals
``steady_gain(v) @ v``, where ``steady_gain`` is the slip-to-force gain
obtained by inverting the (negated) transport operator with the
friction source frozen at that slip.  Everything else (deflection
profile, steering or lumped state) back-substitutes linearly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .grid import Grid, KernelSet, axle_transport_block, force_functional
from .params import ModelMatrices, sigma_diag
from .plant import PlantState, ode_rhs, pde_rhs


class SolverError(RuntimeError):
    """Newton iteration failed to converge or hit a singular Jacobian."""


@dataclass
class OperatorFactorization:
    """LU factors of the discrete source-augmented operator at frozen slip ``y``.

    The operator is block diagonal over axles; each block acts on the
    free nodes (inlet eliminated).
    """

    y: np.ndarray
    lu: tuple          # per-axle (lu, piv) pairs
    grid: Grid

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve  operator @ w = rhs  for a field rhs of shape (2, n_nodes)."""
        w = np.zeros_like(rhs)
        for i in range(2):
            w[i, 1:] = sla.lu_solve(self.lu[i], rhs[i, 1:])
        return w


def factorize_operator(y: np.ndarray, kernels: KernelSet, grid: Grid,
                       mats: ModelMatrices) -> OperatorFactorization:
    """Assemble and factor the source-augmented operator for frozen slip ``y``."""
    s = mats.body.theta * sigma_diag(np.asarray(y, float), mats.axles, mats.body.eps)
    lus = []
    for i in range(2):
        blk = axle_transport_block(i, kernels, grid, mats)
        blk += s[i] * np.eye(grid.n_nodes - 1)
        blk += s[i] * np.tile(kernels.w_coupling[i, 1:], (grid.n_nodes - 1, 1))
        try:
            lus.append(sla.lu_factor(blk))
        except sla.LinAlgError as exc:  # pragma: no cover - signals broken parameters
            raise SolverError(f"singular patch operator at y={y}: {exc}") from exc
    return OperatorFactorization(y=np.asarray(y, float), lu=tuple(lus), grid=grid)


def invert_a_sigma(y: np.ndarray, rhs: np.ndarray, kernels: KernelSet, grid: Grid,
                   mats: ModelMatrices) -> np.ndarray:
    """Field w with (transport + frozen source) w = rhs and w = 0 at the inlet."""
    return factorize_operator(y, kernels, grid, mats).solve(rhs)


def psi_matrix(y: np.ndarray, kernels: KernelSet, grid: Grid, mats: ModelMatrices,
               fact: OperatorFactorization | None = None) -> np.ndarray:
    """Steady slip-to-force gain at frozen slip ``y``; invertible 2x2.

    Column j is minus the force functional of the operator solve against
    the constant field given by column j of the deflection forcing gain.
    """
    fact = fact or factorize_operator(y, kernels, grid, mats)
    psi = np.zeros((2, 2))
    h = mats.deflection_gain_matrix
    for j in range(2):
        rhs = np.tile(h[:, j][:, None], (1, grid.n_nodes))
        w = fact.solve(rhs)
        psi[:, j] = -force_functional(w, kernels, grid)
    cond = np.linalg.cond(psi)
    if cond > 1e12:
        raise SolverError(f"steady slip-to-force gain is near singular (cond={cond:.3g})")
    return psi


def m_profile(v_star: np.ndarray, kernels: KernelSet, grid: Grid,
              mats: ModelMatrices) -> np.ndarray:
    """Nodewise 2x2 profile mapping the virtual force law into the field.

    Shape (n_nodes, 2, 2); zero at the inlet, and its force functional is
    the identity to solver precision (the profile is the operator solve
    of the forcing gain, renormalized by the inverse steady gain).
    """
    fact = factorize_operator(v_star, kernels, grid, mats)
    psi = psi_matrix(v_star, kernels, grid, mats, fact=fact)
    h = mats.deflection_gain_matrix
    cols = []
    for j in range(2):
        rhs = np.tile(h[:, j][:, None], (1, grid.n_nodes))
        cols.append(fact.solve(rhs))
    psi_inv = np.linalg.inv(psi)
    m = np.zeros((grid.n_nodes, 2, 2))
    for k in range(grid.n_nodes):
        wk = np.column_stack([cols[0][:, k], cols[1][:, k]])
        m[k] = -wk @ psi_inv
    return m


@dataclass
class EquilibriumPoint:
    """Stationary point of the coupled dynamics for a constant input."""

    x_star: np.ndarray
    z_star: np.ndarray
    u_star: np.ndarray
    v_star: np.ndarray
    forces: np.ndarray
    residual: float        # max-norm of the full semidiscrete RHS, relative
    iterations: int


def _rhs_residual(point_x, point_z, point_u, mats, kernels, grid) -> float:
    """Relative max-norm of the full semidiscrete RHS at a candidate point."""
    st = PlantState(np.asarray(point_x, float), np.asarray(point_z, float))
    rx = ode_rhs(st, point_u, mats, kernels, grid)
    rz = pde_rhs(st, point_u, mats, kernels, grid)
    # scale by the magnitudes of the constituent terms so "relative" is meaningful
    f = force_functional(st.z, kernels, grid)
    scale_x = max(np.abs(mats.drift @ st.x).max(), np.abs(mats.force_gain @ f).max(),
                  np.abs(mats.wind).max(), 1e-9)
    v = mats.slip_map @ st.x + mats.steer_gain @ np.asarray(point_u, float)
    from .grid import upwind_derivative
    scale_z = max(np.abs(mats.deflection_gain * v).max(),
                  float(np.abs(mats.transport[:, None] * upwind_derivative(st.z, grid)).max()),
                  1e-9)
    return max(np.abs(rx).max() / scale_x, np.abs(rz).max() / scale_z)


def solve_equilibrium(mats: ModelMatrices, kernels: KernelSet, grid: Grid,
                      x_star: np.ndarray | None = None,
                      u_star: np.ndarray | None = None,
                      v_init: np.ndarray | None = None,
                      tol: float = 1e-10, max_iter: int = 50) -> EquilibriumPoint:
    """Solve the stationary system for a target lumped state or steering.

    Exactly one of ``x_star`` (find the steering) or ``u_star`` (find the
    lumped state) must be given.  A damped Newton iteration runs on the
    2-vector steady slip velocity; the step is halved until the residual
    norm decreases.

    Near-critical oversteer configurations admit several stationary
    points at fixed steering (one per slip-sign quadrant); the root
    reached then depends on the start, which ``v_init`` overrides.
    """
    if (x_star is None) == (u_star is None):
        raise ValueError("specify exactly one of x_star or u_star")
    slip_inv = np.linalg.inv(mats.slip_map)
    g1 = mats.force_gain
    g1_inv = np.linalg.inv(g1)

    if x_star is not None:
        xs = np.asarray(x_star, float)

        def residual(v):
            psi = psi_matrix(v, kernels, grid, mats)
            return g1 @ (psi @ v) + mats.drift @ xs + mats.wind

        v = mats.slip_map @ xs   # zero-steering initial guess
    else:
        us = np.asarray(u_star, float)

        def residual(v):
            psi = psi_matrix(v, kernels, grid, mats)
            x_of_v = slip_inv @ (v - mats.steer_gain @ us)
            return g1 @ (psi @ v) + mats.drift @ x_of_v + mats.wind

        # initial guess from the source-frozen linear problem
        psi0 = psi_matrix(np.zeros(2), kernels, grid, mats)
        lin = g1 @ psi0 + mats.drift @ slip_inv
        v = np.linalg.solve(lin, mats.drift @ slip_inv @ mats.steer_gain @ us - mats.wind)

    if v_init is not None:
        v = np.asarray(v_init, float)
    r = residual(v)
    it = 0
    for it in range(1, max_iter + 1):
        if np.abs(r).max() < tol:
            break
        jac = np.zeros((2, 2))
        for j in range(2):
            h = 1e-7 * max(1.0, abs(v[j]))
            e = np.zeros(2)
            e[j] = h
            jac[:, j] = (residual(v + e) - residual(v - e)) / (2.0 * h)
        try:
            dv = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular Newton Jacobian at v={v}") from exc
        lam, r_new, v_new = 1.0, r, v
        while lam >= 1e-8:
            cand = v + lam * dv
            r_cand = residual(cand)
            if np.abs(r_cand).max() < np.abs(r).max():
                v_new, r_new = cand, r_cand
                break
            lam *= 0.5
        if lam < 1e-8:
            raise SolverError(f"Newton damping stalled at v={v}, |r|={np.abs(r).max():.3e}")
        v, r = v_new, r_new
    else:
        raise SolverError(f"no convergence after {max_iter} iterations, |r|={np.abs(r).max():.3e}")

    fact = factorize_operator(v, kernels, grid, mats)
    h_v = np.tile((mats.deflection_gain * v)[:, None], (1, grid.n_nodes))
    z = -fact.solve(h_v)
    if x_star is not None:
        xs = np.asarray(x_star, float)
        us = np.linalg.solve(mats.steer_gain, v - mats.slip_map @ xs)
    else:
        us = np.asarray(u_star, float)
        xs = slip_inv @ (v - mats.steer_gain @ us)
    forces = force_functional(z, kernels, grid)
    res = _rhs_residual(xs, z, us, mats, kernels, grid)
    return EquilibriumPoint(x_star=xs, z_star=z, u_star=us, v_star=v,
                            forces=forces, residual=res, iterations=it)
