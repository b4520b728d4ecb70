# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

from .barriers import (
    BarrierParams,
    ComparisonCoefficient,
    ComparisonReport,
    FluxBoundReport,
    RestartReport,
    admissible_radius,
    barrier_table,
    check_envelope,
    check_flux_bound,
    comparison_h_vs_W,
    envelope,
    restart_bound,
    scan_admissible_radius,
    solve_comparison_problem,
    solve_w,
    wtilde,
    wtilde_dx_at_R,
)
from .base import (
    BaseParabolicSolver,
    BaseParabolicSolverParameters,
    BaseParabolicSolverState,
    HeatSolver,
    VariableCoefficientSolver,
)
from .common import BoundaryCondition
from .config import (
    ConfigurationError,
    ExperimentConfig,
    parse_config,
)
from .duality import (
    CertificateReport,
    CertifyOptions,
    ChainReport,
    Schedule,
    TermEstimate,
    build_c,
    certify,
    certify_chain,
    energy_identity,
    floor_and_smooth,
    solve_dual,
    solve_q,
)
from .grid import (
    BallDomain,
    Field,
    Grid,
    SpaceTimeField,
    laplacian,
    normal_derivative,
    read_run_directory,
    shell_time_integral,
    weighted_l1,
    write_run_directory,
)
from .manifest import RunManifest, write_manifest
from .measures import (
    Atom,
    DensityBlock,
    SignedMeasure,
    cell_average,
    gaussian_moment,
    suggest_half_width,
)
from .nonlinearity import (
    Nonlinearity,
    eval_alpha,
    make_linear,
    make_two_phase,
    validate_generalized,
)
from .representation import (
    GreenIdentityTerms,
    MollifierSpec,
    green_residual,
    green_terms,
    mollify,
)
from .similarity import (
    interface_convergence_study,
    neumann_interface,
    neumann_lambda,
)
from .solver import (
    NewtonConvergenceError,
    SolveConfig,
    distributional_residual,
    evolve,
    initial_trace,
    run,
    step,
    sup_after,
)
from .testfunctions import (
    BallBump,
    SpaceTimeProduct,
    TensorBump,
    TimeFactor,
    builtin_test_functions,
)

# **************************************************************************************

__version__ = "0.1.0"

# **************************************************************************************

__license__ = "MIT"

# **************************************************************************************

__all__: list[str] = [
    "Atom",
    "BallBump",
    "BallDomain",
    "BarrierParams",
    "BaseParabolicSolver",
    "BaseParabolicSolverParameters",
    "BaseParabolicSolverState",
    "BoundaryCondition",
    "CertificateReport",
    "CertifyOptions",
    "ChainReport",
    "ComparisonCoefficient",
    "ComparisonReport",
    "ConfigurationError",
    "DensityBlock",
    "ExperimentConfig",
    "Field",
    "FluxBoundReport",
    "GreenIdentityTerms",
    "Grid",
    "HeatSolver",
    "MollifierSpec",
    "NewtonConvergenceError",
    "Nonlinearity",
    "RestartReport",
    "RunManifest",
    "Schedule",
    "SignedMeasure",
    "SolveConfig",
    "SpaceTimeField",
    "SpaceTimeProduct",
    "TensorBump",
    "TermEstimate",
    "TimeFactor",
    "VariableCoefficientSolver",
    "admissible_radius",
    "barrier_table",
    "build_c",
    "builtin_test_functions",
    "cell_average",
    "certify",
    "certify_chain",
    "check_envelope",
    "check_flux_bound",
    "comparison_h_vs_W",
    "distributional_residual",
    "energy_identity",
    "envelope",
    "eval_alpha",
    "evolve",
    "floor_and_smooth",
    "gaussian_moment",
    "green_residual",
    "green_terms",
    "initial_trace",
    "interface_convergence_study",
    "laplacian",
    "make_linear",
    "make_two_phase",
    "mollify",
    "neumann_interface",
    "neumann_lambda",
    "normal_derivative",
    "parse_config",
    "read_run_directory",
    "restart_bound",
    "run",
    "scan_admissible_radius",
    "shell_time_integral",
    "solve_comparison_problem",
    "solve_dual",
    "solve_q",
    "solve_w",
    "step",
    "suggest_half_width",
    "sup_after",
    "validate_generalized",
    "weighted_l1",
    "write_manifest",
    "write_run_directory",
    "wtilde",
    "wtilde_dx_at_R",
]

# **************************************************************************************
