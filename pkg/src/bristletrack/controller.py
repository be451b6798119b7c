"""Backstepping steering controllers built on the patch passivity margin.

The design regulates the lumped state with a virtual force law, then
shapes the deflection field toward the profile that realizes that law,
using only bounded functionals of the field.  State feedback reads the
true plant state; output feedback reads the observer estimates through
the identical formula.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analysis import dissipativity_constant
from .equilibrium import EquilibriumPoint, m_profile, psi_matrix
from .grid import Grid, KernelSet, force_functional
from .params import ModelMatrices


@dataclass(frozen=True)
class ControllerGains:
    """Synthesized gains plus the precomputed equilibrium-dependent data.

    ``kx``/``kz_nodes`` are the collapsed static gains equivalent to the
    structured law: u = u_star + kx (x - x_star) + sum_k kz_nodes[k] (z - z_star)[:, k].
    """

    q: float
    gamma1: float
    omega_h: float
    a1_star: np.ndarray          # drift + q I
    virtual_gain: np.ndarray     # x-deviation -> virtual force law
    psi_inv: np.ndarray          # inverse steady slip-to-force gain at v_star
    equilibrium: EquilibriumPoint
    m_prof: np.ndarray           # (n_nodes, 2, 2) field profile of the virtual law
    mq: np.ndarray = field(repr=False)        # (n_nodes, 2, 2) M^T times storage weight
    mq_inf: float = 0.0                       # sup-norm of M^T Q over nodes
    sm: np.ndarray = field(default=None, repr=False)   # integral of M^T Q M
    kx: np.ndarray = field(default=None, repr=False)
    kz_nodes: np.ndarray = field(default=None, repr=False)


def synthesize_gains(q: float, eq: EquilibriumPoint, mats: ModelMatrices,
                     kernels: KernelSet, grid: Grid,
                     omega_h: float | None = None) -> ControllerGains:
    """Build all controller gains for ODE gain ``q`` at equilibrium ``eq``.

    The coupling gain follows the storage-based rule
    ``gamma1 = (q / omega_h) * |G1^-1 A1*|^2 * sup_k |M^T(k) Q(k)|^2``
    with the dissipativity margin computed on the same grid.
    """
    if q <= 0:
        raise ValueError(f"q must be > 0, got {q}")
    if omega_h is None:
        omega_h = dissipativity_constant(kernels, grid, mats)
    if omega_h <= 0:
        raise ValueError(f"dissipativity margin must be positive, got {omega_h}")

    g1 = mats.force_gain
    g1_inv = np.linalg.inv(g1)
    a1_star = mats.drift + q * np.eye(2)
    virtual_gain = -g1_inv @ a1_star

    m = m_profile(eq.v_star, kernels, grid, mats)
    mq = np.einsum('kji,jk->kji', m, kernels.storage)  # M^T(k) diag(Q(k))
    mq_inf = max(np.linalg.norm(mq[k], 2) for k in range(grid.n_nodes))
    sm = np.einsum('k,kij,kjl->il', grid.weights, mq, m)

    gamma1 = (q / omega_h) * np.linalg.norm(g1_inv @ a1_star, 2) ** 2 * mq_inf ** 2
    psi_inv = np.linalg.inv(psi_matrix(eq.v_star, kernels, grid, mats))

    # collapse the structured law into static gains (used by the fast kernel)
    g2_inv = np.linalg.inv(mats.steer_gain)
    cc = (g1_inv @ a1_star @ g1).T
    kx = -g2_inv @ (-cc @ sm @ virtual_gain + gamma1 * g1.T
                    + mats.slip_map - psi_inv @ virtual_gain)
    kz_nodes = np.einsum('ij,k,kjl->kil', -g2_inv @ cc, grid.weights, mq)

    return ControllerGains(q=q, gamma1=float(gamma1), omega_h=float(omega_h),
                           a1_star=a1_star, virtual_gain=virtual_gain, psi_inv=psi_inv,
                           equilibrium=eq, m_prof=m, mq=mq, mq_inf=float(mq_inf),
                           sm=sm, kx=kx, kz_nodes=kz_nodes)


def virtual_law(x_delta: np.ndarray, gains: ControllerGains) -> np.ndarray:
    """Force the lumped deviation would need to decay at rate q."""
    return gains.virtual_gain @ np.asarray(x_delta, float)


def z_functional(z_delta: np.ndarray, x_delta: np.ndarray, gains: ControllerGains,
                 kernels: KernelSet, grid: Grid) -> np.ndarray:
    """Gap between the realized force deviation and the virtual law."""
    return force_functional(z_delta, kernels, grid) - virtual_law(x_delta, gains)


def zm_functional(zeta: np.ndarray, gains: ControllerGains, grid: Grid) -> np.ndarray:
    """Profile-weighted storage moment of a transformed field."""
    return np.einsum('k,kij,jk->i', grid.weights, gains.mq, zeta)


def transformed_field(z_delta: np.ndarray, x_delta: np.ndarray,
                      gains: ControllerGains) -> np.ndarray:
    """Deflection deviation minus the profile carrying the virtual law."""
    pi = virtual_law(x_delta, gains)
    return z_delta - np.einsum('kij,j->ik', gains.m_prof, pi)


def _feedback(x: np.ndarray, z: np.ndarray, gains: ControllerGains,
              mats: ModelMatrices, kernels: KernelSet, grid: Grid) -> np.ndarray:
    eq = gains.equilibrium
    x_delta = np.asarray(x, float) - eq.x_star
    z_delta = np.asarray(z, float) - eq.z_star
    pi = virtual_law(x_delta, gains)
    zeta = z_delta - np.einsum('kij,j->ik', gains.m_prof, pi)
    zm = zm_functional(zeta, gains, grid)
    g1_inv_a1s_g1 = (np.linalg.inv(mats.force_gain) @ gains.a1_star @ mats.force_gain)
    g2_inv = np.linalg.inv(mats.steer_gain)
    u_delta = (-g2_inv @ (g1_inv_a1s_g1.T @ zm + gains.gamma1 * mats.force_gain.T @ x_delta)
               - g2_inv @ (mats.slip_map @ x_delta - gains.psi_inv @ pi))
    return eq.u_star + u_delta


def state_feedback(x: np.ndarray, z: np.ndarray, gains: ControllerGains,
                   mats: ModelMatrices, kernels: KernelSet, grid: Grid) -> np.ndarray:
    """Steering command from the true plant state."""
    return _feedback(x, z, gains, mats, kernels, grid)


def output_feedback(x_hat: np.ndarray, z_hat: np.ndarray, gains: ControllerGains,
                    mats: ModelMatrices, kernels: KernelSet, grid: Grid) -> np.ndarray:
    """Steering command from observer estimates; same formula as state feedback."""
    return _feedback(x_hat, z_hat, gains, mats, kernels, grid)


def collapsed_feedback(x: np.ndarray, z: np.ndarray, gains: ControllerGains) -> np.ndarray:
    """Static-gain form of the control law; must agree with state_feedback."""
    eq = gains.equilibrium
    u = eq.u_star + gains.kx @ (np.asarray(x, float) - eq.x_star)
    zd = np.asarray(z, float) - eq.z_star
    u = u + np.einsum('kij,jk->i', gains.kz_nodes, zd)
    return u
