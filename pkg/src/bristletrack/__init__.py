"""Single-track vehicle dynamics with distributed bristle tire friction.

Simulation of the coupled lumped/distributed dynamics, stabilizing
backstepping steering control (state and output feedback), a cascaded
observer, and numerical certification of the structural properties the
design rests on.
"""

from .analysis import (CertificationReport, certify, composite_v,
                       dissipativity_constant, lyapunov_v1, lyapunov_v2,
                       output_feedback_weights, state_norm, storage_value)
from .controller import (ControllerGains, collapsed_feedback, output_feedback,
                         state_feedback, synthesize_gains, transformed_field,
                         virtual_law, z_functional, zm_functional)
from .equilibrium import (EquilibriumPoint, OperatorFactorization, SolverError,
                          invert_a_sigma, m_profile, psi_matrix, solve_equilibrium)
from .grid import (Grid, KernelSet, apply_transport_operator,
                   assemble_transport_operator, build_kernels,
                   coupling_functional, force_functional, gradient_functional)
from .observer import (ObserverDesignError, ObserverState, error_functional,
                       error_gram, error_matrix, error_weight, gain_l1,
                       observer_rhs)
from .params import (AxleTireParams, ModelMatrices, ParameterError,
                     VehicleBodyParams, abs_eps, build_matrices,
                     pressure_gradient, pressure_profile, rel_velocity,
                     sigma_matrix)
from .plant import (Measurement, PlantState, measure, ode_rhs, pde_rhs,
                    tire_forces)
from .sim import (DelayLine, NoiseChannel, SimConfig, SimTrace, ValidationError,
                  passivity_residuals, prepare, run_scenario, step)

__version__ = "0.1.0"
