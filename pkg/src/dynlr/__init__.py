"""Randomized dynamical low-rank integrators for matrix differential equations."""

from .linalg import (
    FactoredMatrix,
    SketchOperator,
    SvdResult,
    augment_basis,
    gaussian_sketch,
    orth,
    svd,
    truncate_rank,
    truncate_tol,
)
from .fields import LambdaField, SplitLinearField, VectorField
from .odes import OdeProblem, SolverSpec, reference_solve, solve, solve_substep
from .rangefinder import (
    AdaptiveConfig,
    RangefinderConfig,
    adaptive_dynamical_rangefinder,
    dynamical_rangefinder,
    gaussian_norm_estimate,
    static_rangefinder,
)
from .steppers import (
    StepperConfig,
    Trajectory,
    adgn_step,
    adrsvd_step,
    dgn_step,
    drsvd_step,
    integrate,
)
from .baselines import (
    augmented_bug_step,
    bug_step,
    ksl_step,
    projected_euler_step,
    tangent_project,
)
from .problems import ProblemSpec, make_problem
from .rng import derive_rng

__all__ = [
    "AdaptiveConfig",
    "FactoredMatrix",
    "LambdaField",
    "OdeProblem",
    "ProblemSpec",
    "RangefinderConfig",
    "SketchOperator",
    "SolverSpec",
    "SplitLinearField",
    "StepperConfig",
    "SvdResult",
    "Trajectory",
    "VectorField",
    "adaptive_dynamical_rangefinder",
    "adgn_step",
    "adrsvd_step",
    "augment_basis",
    "augmented_bug_step",
    "bug_step",
    "derive_rng",
    "dgn_step",
    "drsvd_step",
    "dynamical_rangefinder",
    "gaussian_norm_estimate",
    "gaussian_sketch",
    "integrate",
    "ksl_step",
    "make_problem",
    "orth",
    "projected_euler_step",
    "reference_solve",
    "solve",
    "solve_substep",
    "static_rangefinder",
    "svd",
    "tangent_project",
    "truncate_rank",
    "truncate_tol",
]
