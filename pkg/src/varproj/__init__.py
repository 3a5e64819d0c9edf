"""Variable-projection solvers for regularized separable nonlinear least
squares, with LSQR-based inexact inner solves and a-posteriori error bounds."""

from .bounds import (
    BoundInvalidError,
    BoundReport,
    backward_perturbation,
    bound_report,
    initial_tolerance,
    jacobian_bound,
    residual_bound,
    solution_bound,
)
from .deconv import (
    BenchConfig,
    ConfigError,
    ProblemInstance,
    build_problem,
    build_regularizer,
    default_signal,
    gaussian_blur_model,
    grid_minimizer,
    objective_grid,
    reduced_objective,
    stacked_operator,
)
from .inner_solvers import (
    DirectFactorization,
    InnerSolution,
    LsqrOptions,
    NumericalBreakdownError,
    RankDeficiencyError,
    SingularSystemError,
    apply_pinv,
    apply_pinv_transpose,
    apply_projector_perp,
    condition_number,
    direct_solve,
    lsqr_solve,
    spectral_norm,
)
from .linops import (
    DenseOperator,
    FirstDifferenceOperator,
    LinearOperator,
    RowScaledOperator,
    StackedOperator,
    SymmetricToeplitzOperator,
    fd_derivative_builder,
    finite_difference_derivative,
    first_difference,
    gaussian_toeplitz,
    gaussian_toeplitz_derivative,
    stack,
)
from .varpro import (
    IterationRecord,
    OuterOptions,
    SeparableModel,
    SingularStepError,
    SolverTrace,
    ToleranceSchedule,
    ToleranceWarning,
    approx_jacobian,
    exact_jacobian,
    gauss_newton_step,
    genvarpro,
    gradient,
    inexact_genvarpro,
    reduced_residual,
)

__version__ = "0.1.0"
