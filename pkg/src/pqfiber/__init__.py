"""Fibering-method solver for weighted (p,q)-Laplacian eigenproblems on
truncated radial exterior domains.

The library computes the principal eigenvalue of the weighted p-Laplacian,
minimizes the reduced (fibered) energy over the unit constraint sphere for
spectral parameters above it, reconstructs the positive solutions, and
drives parameter sweeps that reproduce the qualitative bifurcation diagrams
of both exponent orderings. Independent brute-force and tridiagonal oracles
certify the solvers on tiny instances.
"""

__version__ = "0.1.0"

from .eigensolver import EigenOptions, PrincipalPair, assert_membership, compute_principal_pair
from .errors import (
    ConfigError,
    DegenerateGradient,
    DimensionMismatch,
    EmptyFeasibleSet,
    InfeasibleProfile,
    InsufficientData,
    InvalidGeometry,
    IoFailure,
    LeftFeasibleCone,
    NoConvergence,
    NonIntegrableWeight,
    PqFiberError,
)
from .fibering import FiberSolution, NoSolution, SolutionReport, SolveOptions, solve, verify_solution
from .functionals import (
    FunctionalReport,
    ProblemSpec,
    energy_gap,
    energy_gradient,
    functional_report,
    luxemburg_norm,
    nehari_residual,
    nehari_scale,
    q_energy,
    reconstruct_solution,
    reduced_energy,
    total_energy,
)
from .grid import (
    GridFunction,
    RadialGrid,
    WeightField,
    build_grid,
    discrete_gradient,
    extend_grid,
    integrate_cells,
    parabolic_profile,
    refine_grid,
    sample_weight,
)
from .oracle import (
    BruteForceResult,
    TinyInstance,
    brute_force_lambda1,
    brute_force_reduced_min,
    linear_eigen_oracle,
)
from .sweep import (
    CheckResult,
    SweepPlan,
    SweepRecord,
    Verdict,
    check_asymptotics,
    emit_outputs,
    make_plan,
    run_sweep,
)

__all__ = [
    "__version__",
    "RadialGrid",
    "GridFunction",
    "WeightField",
    "build_grid",
    "refine_grid",
    "extend_grid",
    "sample_weight",
    "discrete_gradient",
    "integrate_cells",
    "parabolic_profile",
    "ProblemSpec",
    "FunctionalReport",
    "energy_gap",
    "q_energy",
    "total_energy",
    "energy_gradient",
    "functional_report",
    "nehari_scale",
    "reduced_energy",
    "reconstruct_solution",
    "luxemburg_norm",
    "nehari_residual",
    "PrincipalPair",
    "EigenOptions",
    "compute_principal_pair",
    "assert_membership",
    "FiberSolution",
    "NoSolution",
    "SolveOptions",
    "SolutionReport",
    "solve",
    "verify_solution",
    "TinyInstance",
    "BruteForceResult",
    "brute_force_reduced_min",
    "brute_force_lambda1",
    "linear_eigen_oracle",
    "SweepRecord",
    "SweepPlan",
    "Verdict",
    "CheckResult",
    "make_plan",
    "run_sweep",
    "check_asymptotics",
    "emit_outputs",
    "PqFiberError",
    "InvalidGeometry",
    "NonIntegrableWeight",
    "DimensionMismatch",
    "DegenerateGradient",
    "InfeasibleProfile",
    "LeftFeasibleCone",
    "EmptyFeasibleSet",
    "NoConvergence",
    "InsufficientData",
    "IoFailure",
    "ConfigError",
]
