"""Asymptotic-preserving multiscale Galerkin solver for linear transport
with oscillatory periodic scattering."""

from .assembly import SpatialSystem, assemble_heat, assemble_spatial, compute_limit_operator
from .errors import AssemblyError, ConfigError, InvalidMediaError, MetricError, SolverError
from .media import MediaSpec, builtin_media, constant_media, evaluate_media
from .mesh import NestedMesh, build_nested_mesh, patch_of
from .msfem import BasisSet, build_global_basis, homogenized_coefficient, solve_local_basis
from .solvers import (
    HeatStepper,
    KineticState,
    LimitStepper,
    ScalarState,
    StepperConfig,
    TransportStepper,
    density,
    heat_step,
    limit_step,
    project_initial,
    transport_step,
    transport_step_asymmetric,
)
from .velocity import VelocitySystem, assemble_velocity_matrices, build_basis, gauss_rule, velocity_system

__version__ = "0.1.0"
