"""Spatial discretization of the contact patch coordinate.

Deflection fields are plain float arrays of shape ``(2, n_nodes)``
(axle-major), with node 0 at the leading edge where the inflow boundary
condition pins the field to zero.  The transport derivative uses
first-order upwind differences (flow runs toward increasing xi), and all
integral functionals use composite trapezoidal weights on the same
nodes.  Upwind is deliberate: it keeps the discrete operator strictly
dissipative in the storage-weighted inner product, which the
certification suite and the controller constant rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import (AxleTireParams, ModelMatrices, pressure_gradient,
                     pressure_profile)


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [0, 1] with trapezoidal quadrature weights."""

    n_intervals: int
    xi: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.n_intervals
        if n < 2:
            raise ValueError("need at least 2 intervals")
        object.__setattr__(self, "xi", np.linspace(0.0, 1.0, n + 1))
        w = np.full(n + 1, 1.0 / n)
        w[0] *= 0.5
        w[-1] *= 0.5
        object.__setattr__(self, "weights", w)

    @property
    def n_nodes(self) -> int:
        return self.n_intervals + 1

    @property
    def dxi(self) -> float:
        return 1.0 / self.n_intervals

    def zero_field(self) -> np.ndarray:
        return np.zeros((2, self.n_nodes))

    def const_field(self, values) -> np.ndarray:
        """Field equal to ``values`` (length 2) at every node except the pinned inlet."""
        z = np.tile(np.asarray(values, float)[:, None], (1, self.n_nodes))
        z[:, 0] = 0.0
        return z

    def l2_norm(self, z: np.ndarray) -> float:
        """Quadrature L2 norm of a field over the patch."""
        return float(np.sqrt(np.sum(self.weights * np.sum(z * z, axis=0))))


@dataclass(frozen=True)
class KernelSet:
    """Sampled integral kernels and the storage weight of the patch model.

    All kernels are diagonal per node and stored as length-2-by-node
    arrays: ``force`` maps deflection to axle force, ``coupling`` is the
    mean-deflection feedback of the carcass, ``gradient``/``edge`` carry
    the pressure-gradient and trailing-edge terms, and ``storage`` is
    the positive weight that makes the transport operator dissipative.
    """

    force: np.ndarray      # (2, n) force kernel, > 0
    coupling: np.ndarray   # (2, n) carcass coupling kernel, <= 0
    gradient: np.ndarray   # (2, n) pressure-gradient kernel
    edge: np.ndarray       # (2,)  trailing-edge kernel, >= 0
    storage: np.ndarray    # (2, n) storage weight (force kernel / forcing gain), > 0
    w_force: np.ndarray = field(repr=False)     # quadrature-folded rows
    w_coupling: np.ndarray = field(repr=False)
    w_gradient: np.ndarray = field(repr=False)


def build_kernels(grid: Grid, mats: ModelMatrices) -> KernelSet:
    """Sample all patch kernels for both axles on the grid nodes."""
    vx = mats.body.speed
    n = grid.n_nodes
    force = np.zeros((2, n))
    coupling = np.zeros((2, n))
    gradient = np.zeros((2, n))
    edge = np.zeros(2)
    for i, axle in enumerate(mats.axles):
        p = pressure_profile(axle, grid.xi)
        dp = pressure_gradient(axle, grid.xi)
        force[i] = axle.fz * axle.stiffness * p
        coupling[i] = -axle.carcass_psi * p
        gradient[i] = -vx * axle.carcass_psi / axle.patch_len * dp
        edge[i] = vx * axle.carcass_psi / axle.patch_len * p[-1]
    storage = force / mats.deflection_gain[:, None]
    w = grid.weights[None, :]
    return KernelSet(force=force, coupling=coupling, gradient=gradient, edge=edge,
                     storage=storage, w_force=w * force, w_coupling=w * coupling,
                     w_gradient=w * gradient)


def _check_sizes(z: np.ndarray, grid: Grid):
    if z.shape != (2, grid.n_nodes):
        raise ValueError(f"field shape {z.shape} does not match grid ({2}, {grid.n_nodes})")


def force_functional(z: np.ndarray, kernels: KernelSet, grid: Grid) -> np.ndarray:
    """Axle force vector: force-kernel-weighted integral of the deflection."""
    _check_sizes(z, grid)
    return np.sum(kernels.w_force * z, axis=1)


def coupling_functional(z: np.ndarray, kernels: KernelSet, grid: Grid) -> np.ndarray:
    """Carcass coupling moment: coupling-kernel-weighted integral."""
    _check_sizes(z, grid)
    return np.sum(kernels.w_coupling * z, axis=1)


def gradient_functional(z: np.ndarray, kernels: KernelSet, grid: Grid) -> np.ndarray:
    """Pressure-gradient integral plus trailing-edge contribution."""
    _check_sizes(z, grid)
    return np.sum(kernels.w_gradient * z, axis=1) + kernels.edge * z[:, -1]


def upwind_derivative(z: np.ndarray, grid: Grid) -> np.ndarray:
    """First-order upwind spatial derivative; inlet node returns 0."""
    d = np.zeros_like(z)
    d[:, 1:] = (z[:, 1:] - z[:, :-1]) / grid.dxi
    return d


def assemble_transport_operator(kernels: KernelSet, grid: Grid,
                                mats: ModelMatrices) -> np.ndarray:
    """Dense matrix of the transport-plus-nonlocal operator on free nodes.

    The inflow node is eliminated (field pinned to zero there); the
    remaining unknowns are ordered axle-major, node 1..n per axle.  The
    matrix is block diagonal over axles because every kernel is.
    """
    nf = grid.n_nodes - 1
    a = np.zeros((2 * nf, 2 * nf))
    for i in range(2):
        blk = axle_transport_block(i, kernels, grid, mats)
        a[i * nf:(i + 1) * nf, i * nf:(i + 1) * nf] = blk
    return a


def axle_transport_block(i: int, kernels: KernelSet, grid: Grid,
                         mats: ModelMatrices) -> np.ndarray:
    """Single-axle block of :func:`assemble_transport_operator`."""
    nf = grid.n_nodes - 1
    lam = mats.transport[i]
    blk = np.diag(np.full(nf, -lam / grid.dxi)) + np.diag(np.full(nf - 1, lam / grid.dxi), -1)
    # nonlocal rows: gradient functional acts identically on every node
    blk += np.tile(kernels.w_gradient[i, 1:], (nf, 1))
    blk[:, -1] += kernels.edge[i]
    return blk


def apply_transport_operator(z: np.ndarray, kernels: KernelSet, grid: Grid,
                             mats: ModelMatrices) -> np.ndarray:
    """Apply the transport-plus-nonlocal operator nodewise (inlet row zero)."""
    _check_sizes(z, grid)
    g = gradient_functional(z, kernels, grid)
    out = -mats.transport[:, None] * upwind_derivative(z, grid) + g[:, None]
    out[:, 0] = 0.0
    return out
