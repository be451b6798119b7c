"""Semidiscrete right-hand side of the coupled vehicle/patch dynamics.

Pure functions of the state; the fast simulation kernel mirrors these
and is pinned to them by tests, so this module is the readable single
source of truth for the dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (Grid, KernelSet, coupling_functional, force_functional,
                   gradient_functional, upwind_derivative)
from .params import ModelMatrices, rel_velocity, sigma_diag


@dataclass
class PlantState:
    """Lumped state X = [lateral velocity, yaw rate] and deflection field."""

    x: np.ndarray          # shape (2,)
    z: np.ndarray          # shape (2, n_nodes), z[:, 0] == 0

    def copy(self) -> "PlantState":
        return PlantState(self.x.copy(), self.z.copy())


@dataclass
class Measurement:
    """Gain-scaled slip velocity measurement with its sample time."""

    y: np.ndarray
    t: float = 0.0


def ode_rhs(state: PlantState, u: np.ndarray, mats: ModelMatrices,
            kernels: KernelSet, grid: Grid) -> np.ndarray:
    """Time derivative of the lumped state."""
    f = force_functional(state.z, kernels, grid)
    return mats.drift @ state.x + mats.force_gain @ f + mats.wind


def pde_rhs(state: PlantState, u: np.ndarray, mats: ModelMatrices,
            kernels: KernelSet, grid: Grid) -> np.ndarray:
    """Time derivative of the deflection field (inlet node held at zero)."""
    v = rel_velocity(state.x, u, mats)
    s = mats.body.theta * sigma_diag(v, mats.axles, mats.body.eps)
    cpl = coupling_functional(state.z, kernels, grid)
    grad = gradient_functional(state.z, kernels, grid)
    dz = (-mats.transport[:, None] * upwind_derivative(state.z, grid)
          + s[:, None] * (state.z + cpl[:, None])
          + grad[:, None]
          + (mats.deflection_gain * v)[:, None])
    dz[:, 0] = 0.0
    return dz


def tire_forces(z: np.ndarray, kernels: KernelSet, grid: Grid) -> np.ndarray:
    """Per-axle lateral tire forces [front, rear] in newtons."""
    return force_functional(z, kernels, grid)


def measure(x: np.ndarray, u: np.ndarray, mats: ModelMatrices, t: float = 0.0) -> Measurement:
    """Measurement: slip velocity scaled by the deflection forcing gain."""
    v = rel_velocity(x, u, mats)
    return Measurement(y=mats.deflection_gain * v, t=t)
