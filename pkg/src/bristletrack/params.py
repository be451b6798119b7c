"""Physical parameters, constant matrices and pointwise nonlinear maps.

The model couples a planar single-track (bicycle) vehicle with one
distributed friction state per axle.  Each axle lumps its tires into a
single contact patch of length ``patch_len`` over which a bristle
deflection field lives; the deflection is transported through the patch
and forced by the rigid relative (slip) velocity of the patch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

MuLaw = Union[float, Callable[[float], float]]


class ParameterError(ValueError):
    """Raised when a physical parameter violates its validity range."""


@dataclass(frozen=True)
class AxleTireParams:
    """Per-axle contact patch and bristle friction parameters.

    Parameters
    ----------
    patch_len : float
        Contact patch length (m), > 0.
    stiffness : float
        Bristle micro-stiffness per unit length (1/m), > 0.
    shape_a : float
        Decay rate of the exponential vertical pressure profile, > 0.
    fz : float
        Vertical load on the axle (N), > 0.
    carcass_phi : float
        Structural carcass parameter in (0, 1]; the forcing on the
        deflection field scales with ``2 * carcass_phi``.
    carcass_psi : float
        Complementary structural parameter in [0, 1).  Must satisfy
        ``carcass_phi + carcass_psi == 1`` exactly.
    mu : float or callable
        Friction coefficient; either a positive constant or a positive
        function of the slip velocity.  Defaults to 1.
    """

    patch_len: float
    stiffness: float
    shape_a: float
    fz: float
    carcass_phi: float = 0.92
    carcass_psi: float = 0.08
    mu: MuLaw = 1.0

    def __post_init__(self):
        if self.patch_len <= 0:
            raise ParameterError(f"patch_len must be > 0, got {self.patch_len}")
        if self.stiffness <= 0:
            raise ParameterError(f"stiffness must be > 0, got {self.stiffness}")
        if self.shape_a <= 0:
            raise ParameterError(f"shape_a must be > 0, got {self.shape_a}")
        if self.fz <= 0:
            raise ParameterError(f"fz must be > 0, got {self.fz}")
        if not (0.0 < self.carcass_phi <= 1.0):
            raise ParameterError(f"carcass_phi must lie in (0, 1], got {self.carcass_phi}")
        if not (0.0 <= self.carcass_psi < 1.0):
            raise ParameterError(f"carcass_psi must lie in [0, 1), got {self.carcass_psi}")
        if abs(self.carcass_phi + self.carcass_psi - 1.0) > 1e-12:
            raise ParameterError("carcass_phi + carcass_psi must equal 1 exactly")
        if isinstance(self.mu, (int, float)) and self.mu <= 0:
            raise ParameterError(f"constant mu must be > 0, got {self.mu}")

    def mu_value(self, v: float) -> float:
        """Friction coefficient at slip velocity ``v``."""
        if callable(self.mu):
            m = float(self.mu(v))
            if m <= 0:
                raise ParameterError(f"mu({v}) returned non-positive value {m}")
            return m
        return float(self.mu)

    @property
    def mu_is_constant(self) -> bool:
        return not callable(self.mu)


@dataclass(frozen=True)
class VehicleBodyParams:
    """Rigid body, operating point and disturbance parameters."""

    mass: float                  # kg
    yaw_inertia: float           # kg m^2
    dist_front: float            # CoG to front axle (m)
    dist_rear: float             # CoG to rear axle (m)
    speed: float                 # constant longitudinal speed (m/s)
    wind_force: float = 0.0      # lateral wind gust (N)
    wind_offset: float = 0.0     # wind application offset from CoG (m)
    theta: float = 1.0           # friction-variation weight, >= 0
    eps: float = 0.0             # regularization of |.| in the source term, >= 0

    def __post_init__(self):
        for name in ("mass", "yaw_inertia", "dist_front", "dist_rear", "speed"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.theta < 0:
            raise ParameterError(f"theta must be >= 0, got {self.theta}")
        if self.eps < 0:
            raise ParameterError(f"eps must be >= 0, got {self.eps}")


@dataclass(frozen=True)
class ModelMatrices:
    """Constant matrices of the semidiscrete vehicle/patch interconnection.

    ``drift`` and ``force_gain`` drive the lumped state
    X = [lateral velocity, yaw rate]; ``slip_map`` and ``steer_gain`` map
    (X, steering) to the per-axle slip velocity; ``deflection_gain`` and
    ``transport`` are the diagonal forcing and transport coefficients of
    the deflection field.
    """

    drift: np.ndarray          # 2x2, X-drift (contains -speed coupling)
    slip_map: np.ndarray       # 2x2, X -> slip velocity
    force_gain: np.ndarray     # 2x2, invertible, tire force -> X-dot
    steer_gain: np.ndarray     # 2x2, invertible, steering -> slip velocity
    deflection_gain: np.ndarray  # length-2 diagonal of the field forcing gain
    transport: np.ndarray      # length-2 diagonal of transport speeds (1/s)
    wind: np.ndarray           # length-2 constant disturbance
    body: VehicleBodyParams = field(repr=False)
    axles: tuple = field(repr=False)

    @property
    def deflection_gain_matrix(self) -> np.ndarray:
        return np.diag(self.deflection_gain)

    @property
    def transport_matrix(self) -> np.ndarray:
        return np.diag(self.transport)


def build_matrices(body: VehicleBodyParams, axles: tuple[AxleTireParams, AxleTireParams]) -> ModelMatrices:
    """Assemble all constant matrices of the lumped/distributed model.

    Raises
    ------
    ParameterError
        If any of mass, inertia, speed or patch lengths is non-positive
        (enforced by the parameter dataclasses).
    """
    front, rear = axles
    vx = body.speed
    drift = np.array([[0.0, -vx], [0.0, 0.0]])
    slip_map = np.array([[1.0, body.dist_front], [1.0, -body.dist_rear]])
    force_gain = -np.array([
        [1.0 / body.mass, 1.0 / body.mass],
        [body.dist_front / body.yaw_inertia, -body.dist_rear / body.yaw_inertia],
    ])
    steer_gain = -vx * np.eye(2)
    deflection_gain = np.array([2.0 * front.carcass_phi, 2.0 * rear.carcass_phi])
    transport = np.array([vx / front.patch_len, vx / rear.patch_len])
    wind = np.array([body.wind_force / body.mass,
                     body.wind_offset * body.wind_force / body.yaw_inertia])
    return ModelMatrices(drift=drift, slip_map=slip_map, force_gain=force_gain,
                         steer_gain=steer_gain, deflection_gain=deflection_gain,
                         transport=transport, wind=wind, body=body, axles=(front, rear))


def pressure_profile(axle: AxleTireParams, xi) -> np.ndarray:
    """Normalized vertical pressure at patch coordinate ``xi`` in [0, 1].

    The profile is exponentially decreasing from the leading edge and
    scaled so it integrates to one over the patch.
    """
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0) or np.any(xi > 1):
        raise ParameterError("xi must lie in [0, 1]")
    a = axle.shape_a
    p0 = a / (1.0 - math.exp(-a))
    return p0 * np.exp(-a * xi)


def pressure_gradient(axle: AxleTireParams, xi) -> np.ndarray:
    """Spatial derivative of :func:`pressure_profile`."""
    return -axle.shape_a * pressure_profile(axle, xi)


def abs_eps(v, eps: float):
    """|v| when ``eps == 0``, the smooth surrogate sqrt(v^2 + eps) otherwise."""
    if eps > 0.0:
        return np.sqrt(np.asarray(v, dtype=float) ** 2 + eps)
    return np.abs(v)


def sigma_matrix(v: np.ndarray, axles: tuple[AxleTireParams, AxleTireParams],
                 eps: float = 0.0) -> np.ndarray:
    """Diagonal nonlinear source matrix of the deflection dynamics.

    Entry i is ``-stiffness_i * |v_i|_eps / mu_i(v_i)``; always <= 0, so
    the source only ever dissipates deflection.
    """
    v = np.asarray(v, dtype=float)
    out = np.zeros((2, 2))
    for i, axle in enumerate(axles):
        out[i, i] = -axle.stiffness * float(abs_eps(v[i], eps)) / axle.mu_value(float(v[i]))
    return out


def sigma_diag(v: np.ndarray, axles, eps: float = 0.0) -> np.ndarray:
    """Diagonal of :func:`sigma_matrix` as a length-2 vector."""
    return np.diag(sigma_matrix(v, axles, eps))


def rel_velocity(x: np.ndarray, u: np.ndarray, mats: ModelMatrices) -> np.ndarray:
    """Rigid relative (slip) velocity of both patches for state ``x``, steering ``u``."""
    return mats.slip_map @ np.asarray(x, float) + mats.steer_gain @ np.asarray(u, float)
