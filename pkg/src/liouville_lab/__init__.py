"""Numerical laboratory for planar Liouville fields -Delta u = W e^u with
polynomial-zero weights: exact blow-up families, a Dirichlet solver, and
concentration diagnostics."""

from .grid import DiskGrid, GridConfigError
from .field import ScalarField, FieldShapeError
from .weights import ConfigValidationError, PoleConfig, WeightSpec
from .quadrature import QuadratureResult, adaptive_polar, total_mass_ladder
from .calculus import (
    OperatorDomainError,
    circle_samples,
    dirichlet_energy,
    gradient_values,
    laplacian,
    pohozaev_boundary_functional,
    weighted_mass,
)
from .families import (
    ClosedFormSolution,
    CollapsingFamily,
    DevelopingMap,
    FamilyMember,
    LamSchedule,
    PoleRule,
    bubble_mass_closed_form,
    developing_map_field,
    flat_bubble,
    make_family,
    polynomial_primitive,
    radial_bubble,
    rescale,
    rescaled_weight,
    singular_part,
)
from .solver import (
    ConvergenceRecord,
    DirichletProblem,
    GreenDecomposition,
    NewtonParams,
    SolverFailure,
    green_decompose,
    harmonic_extension,
    solve_dirichlet,
)
from .diagnostics import (
    CascadeReport,
    DataError,
    DiagnosticsReport,
    MassProfile,
    PohozaevCheck,
    QuantizationVerdict,
    boundary_oscillation,
    detect_cascade,
    energy_identity_check,
    estimate_sigma,
    fitted_log_slope,
    geometric_deltas,
    mass_profile,
    peak_boundary_relation,
    pohozaev_relation_check,
    profile_residual,
    run_diagnostics,
)
from .config import (
    ConfigError,
    DeltaGridSpec,
    ExperimentConfig,
    load_config,
    parse_config,
    read_config_doc,
)

__version__ = "0.1.0"
