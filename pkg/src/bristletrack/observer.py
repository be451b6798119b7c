"""Cascaded observer estimating the lumped state and deflection field.

The field estimate is driven purely by the measurement, so its error
dynamics is autonomous (frozen-source transport, hence contracting);
the lumped estimate adds output injection on top of the model copy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .grid import Grid, KernelSet, coupling_functional, force_functional, \
    gradient_functional, upwind_derivative
from .params import ModelMatrices, sigma_diag


class ObserverDesignError(ValueError):
    """The injection gain fails to make the error matrix Hurwitz."""


@dataclass
class ObserverState:
    x_hat: np.ndarray
    z_hat: np.ndarray

    def copy(self) -> "ObserverState":
        return ObserverState(self.x_hat.copy(), self.z_hat.copy())


def gain_l1(p: float, mats: ModelMatrices) -> np.ndarray:
    """Output-injection gain placing the error matrix strictly in the left half plane.

    For equal carcass parameters (forcing gain a scalar multiple of the
    identity) the gain is ``-(drift + p I) slip_map^-1``; otherwise the
    forcing gain is folded in so the Hurwitz property survives unequal
    axles.  Raises if the resulting error matrix is not Hurwitz.
    """
    a2_inv = np.linalg.inv(mats.slip_map)
    h = mats.deflection_gain
    shifted = mats.drift + p * np.eye(2)
    if abs(h[0] - h[1]) < 1e-12 * max(h):
        l1 = -shifted @ a2_inv
    else:
        l1 = -shifted @ np.linalg.inv(mats.deflection_gain_matrix @ mats.slip_map)
    abar = error_matrix(l1, mats)
    margin = -np.max(np.linalg.eigvals(abar).real)
    if margin <= 0.0:
        raise ObserverDesignError(
            f"error matrix not Hurwitz for p={p} (margin {margin:.3g})")
    return l1


def error_matrix(l1: np.ndarray, mats: ModelMatrices) -> np.ndarray:
    """Closed error matrix of the lumped estimate."""
    return mats.drift + l1 @ mats.deflection_gain_matrix @ mats.slip_map


def observer_rhs(obs: ObserverState, y_meas: np.ndarray, u: np.ndarray,
                 mats: ModelMatrices, kernels: KernelSet, grid: Grid,
                 l1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives of (x_hat, z_hat) for measurement ``y_meas`` and input ``u``.

    The field copy uses only measured quantities: the friction source is
    frozen at the measurement-implied slip and the forcing is the raw
    measurement itself.
    """
    f_hat = force_functional(obs.z_hat, kernels, grid)
    y_hat = mats.deflection_gain * (mats.slip_map @ obs.x_hat + mats.steer_gain @ u)
    dx = (mats.drift @ obs.x_hat + mats.force_gain @ f_hat + mats.wind
          - l1 @ (y_meas - y_hat))

    y_slip = y_meas / mats.deflection_gain
    s = mats.body.theta * sigma_diag(y_slip, mats.axles, mats.body.eps)
    cpl = coupling_functional(obs.z_hat, kernels, grid)
    grad = gradient_functional(obs.z_hat, kernels, grid)
    dz = (-mats.transport[:, None] * upwind_derivative(obs.z_hat, grid)
          + s[:, None] * (obs.z_hat + cpl[:, None])
          + grad[:, None] + y_meas[:, None])
    dz[:, 0] = 0.0
    return dx, dz


def error_gram(l1: np.ndarray, mats: ModelMatrices) -> np.ndarray:
    """Positive definite P with  Abar^T P + P Abar = -I."""
    abar = error_matrix(l1, mats)
    return sla.solve_continuous_lyapunov(abar.T, -np.eye(2))


def error_weight(p_gram: np.ndarray, mats: ModelMatrices, kernels: KernelSet,
                 grid: Grid, omega_h: float) -> float:
    """Field weight making the joint error functional decrease along trajectories.

    Chosen twice as large as the Young-inequality threshold that absorbs
    the force cross term into the field dissipation margin.
    """
    pg = np.linalg.norm(p_gram @ mats.force_gain, 2)
    k_op = max(np.sqrt(np.sum(grid.weights * kernels.force[i] ** 2)) for i in range(2))
    return 2.0 * (pg * k_op) ** 2 / omega_h


def error_functional(x_tilde: np.ndarray, z_tilde: np.ndarray, p_gram: np.ndarray,
                     kappa: float, kernels: KernelSet, grid: Grid) -> float:
    """Quadratic error energy: lumped part with weight P plus kappa times the field storage."""
    xt = np.asarray(x_tilde, float)
    zz = 0.5 * float(np.sum(grid.weights * np.sum(kernels.storage * z_tilde * z_tilde, axis=0)))
    return 0.5 * float(xt @ p_gram @ xt) + kappa * zz
