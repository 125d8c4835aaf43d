"""Bregman proximal point solver for bilevel equilibrium problems on
Hadamard manifolds, with validated geometry primitives, Bregman-function
machinery, monotonicity diagnostics and convergence-trace instrumentation."""

from .bilevel import (
    FejerReport,
    IterationTrace,
    LimsupReport,
    Schedule,
    ScheduleReport,
    SolveResult,
    SolverConfig,
    StepDecayReport,
    fejer_audit,
    limsup_condition_audit,
    solve_bilevel,
    step_decay_audit,
    validate_schedule,
)
from .bregman import (
    BregmanFunction,
    BregmanValidationReport,
    PositiveOrthant,
    WholeManifold,
    Zone,
    builtin_bregman,
    coercive_augment,
    energy_bregman,
    finite_difference_gradient,
    negentropy_bregman,
    sqnorm_bregman,
    validate_bregman,
)
from .descent import DescentResult, geodesic_descent
from .equilibrium import (
    AssumptionsReport,
    Bifunction,
    ConstraintSet,
    EPResidual,
    ExistenceReport,
    MonotonicityReport,
    ball_constraint,
    box_constraint,
    check_assumptions_on_samples,
    check_monotonicity_class,
    ep_residual,
    existence_diagnostic,
    halfspace_constraint,
    make_minimization_bifunction,
    make_vi_bifunction,
    regularized_bifunction,
    zero_bifunction,
)
from .errors import (
    BregproxError,
    ConfigurationError,
    DivergenceError,
    GeometryError,
    ParameterError,
    StrategyError,
    ZoneError,
)
from .geometry import (
    EuclideanSpace,
    Hyperboloid,
    Manifold,
    Point,
    TangentVector,
    TriangleComparisonReport,
    check_comparison_inequalities,
    manifold_from_name,
)
from .subsolver import (
    InnerProblem,
    InnerSolution,
    UniquenessReport,
    solve_inner,
    verify_uniqueness,
)

__version__ = "0.1.0"
