"""Reduced-functional machinery and the two outer Gauss-Newton loops.

Eliminating the linear variable of a separable problem through the inner
least-squares solution leaves a reduced functional f(y) = 0.5 ||F(y)||^2,
where F(y) stacks the data misfit and the scaled regularizer residual.
``genvarpro`` minimizes it by Gauss-Newton with exact inner solves and the
analytic Jacobian; ``inexact_genvarpro`` replaces the inner solve with LSQR
stopped at a scheduled tolerance and assembles the matching approximate
Jacobian from the LSQR iterate.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .inner_solvers import (
    NORM_MODE_INTERNAL,
    DirectFactorization,
    LsqrOptions,
    SingularSystemError,
    apply_pinv_transpose,
    apply_projector_perp,
    condition_number,
    lsqr_solve,
)
from .linops import LinearOperator, stack

_EPS = float(np.finfo(float).eps)

SCHEDULE_KINDS = ("constant", "linear", "exponential", "fixed-small")
FIXED_SMALL_TOLERANCE = 1e-11


class SingularStepError(RuntimeError):
    """The Gauss-Newton step system is rank deficient."""


class ToleranceWarning(UserWarning):
    """The initial inner tolerance is too large for the error bounds to apply."""


@dataclass(frozen=True)
class SeparableModel:
    """A forward operator family A(y) with its partial derivatives.

    ``operator`` maps a length-r parameter vector to an m x n operator;
    ``derivative`` maps (y, j) to dA/dy_j of the same shape. ``feasible``
    is an optional predicate restricting the parameter domain.
    """

    m: int
    n: int
    r: int
    operator: Callable[[np.ndarray], LinearOperator]
    derivative: Callable[[np.ndarray, int], LinearOperator]
    feasible: Callable[[np.ndarray], bool] | None = None

    def is_feasible(self, y: np.ndarray) -> bool:
        return True if self.feasible is None else bool(self.feasible(y))


@dataclass(frozen=True)
class ToleranceSchedule:
    """Rule generating the inner tolerance sequence eps^(k).

    Kinds: ``constant`` keeps eps0; ``linear`` is eps0/k for k >= 1 (eps0 at
    k = 0); ``exponential`` halves every iteration; ``fixed-small`` always
    returns 1e-11. Values are clamped below at ``floor`` so the exponential
    schedule bottoms out at machine precision instead of underflowing.
    """

    kind: str
    epsilon0: float = FIXED_SMALL_TOLERANCE
    floor: float = _EPS

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not self.epsilon0 > 0.0:
            raise ValueError(f"epsilon0 must be positive, got {self.epsilon0}")
        if not self.floor > 0.0:
            raise ValueError(f"floor must be positive, got {self.floor}")

    def value(self, k: int) -> float:
        if k < 0:
            raise ValueError(f"iteration index must be nonnegative, got {k}")
        if self.kind == "constant":
            v = self.epsilon0
        elif self.kind == "linear":
            v = self.epsilon0 if k == 0 else self.epsilon0 / k
        elif self.kind == "exponential":
            v = self.epsilon0 * 0.5**k
        else:  # fixed-small
            v = FIXED_SMALL_TOLERANCE
        return max(v, self.floor)


@dataclass(frozen=True)
class OuterOptions:
    """Stopping rules and inner-solver controls for the outer loops.

    The loop stops when the step norm falls to ``step_tolerance``, the
    gradient norm falls to ``gradient_tolerance``, or after
    ``max_outer_iterations`` Gauss-Newton steps, whichever happens first.
    ``schedule`` is required by the inexact variant only. ``diagnostic``
    makes the inexact variant additionally record, per iterate, the exact
    inner solution, the exact gradient, and explicit-SVD operator norms.
    """

    max_outer_iterations: int = 50
    step_tolerance: float = 1e-10
    gradient_tolerance: float = 0.0
    schedule: ToleranceSchedule | None = None
    lsqr_max_iterations: int = 10000
    norm_estimate_mode: str = NORM_MODE_INTERNAL
    diagnostic: bool = False

    def __post_init__(self):
        if self.max_outer_iterations < 1:
            raise ValueError("max_outer_iterations must be at least 1")
        if self.step_tolerance < 0.0 or self.gradient_tolerance < 0.0:
            raise ValueError("stopping tolerances must be nonnegative")


@dataclass
class IterationRecord:
    """Everything recorded at one outer iterate y^(k)."""

    k: int
    y: np.ndarray
    x: np.ndarray
    f_value: float
    gradient: np.ndarray
    step: np.ndarray | None = None
    epsilon: float | None = None
    inner_iterations: int = 0
    inner_criterion: float | None = None
    inner_converged: bool = True
    seconds: float = 0.0
    x_exact: np.ndarray | None = None
    gradient_exact: np.ndarray | None = None
    kappa: float | None = None
    op_norm: float | None = None


@dataclass
class SolverTrace:
    """Per-iteration records of one outer run plus its final status.

    ``status`` is one of ``step-tolerance``, ``gradient-tolerance``,
    ``max-iterations``, ``inner-failure``, ``singular-step``,
    ``infeasible-iterate``. The last three mark aborted runs with a
    partial record list.
    """

    records: list[IterationRecord] = field(default_factory=list)
    status: str = "max-iterations"
    warnings: list[str] = field(default_factory=list)

    ERROR_STATUSES = ("inner-failure", "singular-step", "infeasible-iterate")

    @property
    def failed(self) -> bool:
        return self.status in self.ERROR_STATUSES

    @property
    def y_history(self) -> np.ndarray:
        return np.array([rec.y for rec in self.records])

    @property
    def f_values(self) -> np.ndarray:
        return np.array([rec.f_value for rec in self.records])

    @property
    def gradient_norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(rec.gradient) for rec in self.records])

    def __len__(self) -> int:
        return len(self.records)


def reduced_residual(model: SeparableModel, y, x, b, L: LinearOperator, lam: float) -> np.ndarray:
    """The stacked residual [A(y) x - b; lam L x] of length m + q."""
    y = _check_y(model, y)
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    if x.shape != (model.n,):
        raise ValueError(f"x must have length {model.n}, got shape {x.shape}")
    if b.shape != (model.m,):
        raise ValueError(f"b must have length {model.m}, got shape {b.shape}")
    A = model.operator(y)
    return np.concatenate([A.matvec(x) - b, lam * L.matvec(x)])


def _jacobian_columns(model, y, fact, x, b) -> np.ndarray:
    """Shared assembly for the exact and approximate reduced Jacobians.

    Column j is P_perp [dA/dy_j x; 0] + (S^dagger)^T dA/dy_j^T (b - A x),
    with S the stacked operator held by ``fact``.
    """
    mq = fact.op.rows
    cols = np.empty((mq, model.r))
    top_residual = np.asarray(b, dtype=float) - fact.op.top.matvec(x)
    for j in range(model.r):
        dop = model.derivative(y, j)
        u = np.zeros(mq)
        u[: model.m] = dop.matvec(x)
        cols[:, j] = apply_projector_perp(fact, u) + apply_pinv_transpose(
            fact, dop.rmatvec(top_residual)
        )
    return cols


def exact_jacobian(model: SeparableModel, y, fact: DirectFactorization, x, b) -> np.ndarray:
    """Jacobian of the reduced residual at y, given the exact inner solution x."""
    return _jacobian_columns(model, _check_y(model, y), fact, np.asarray(x, float), b)


def approx_jacobian(model: SeparableModel, y, fact: DirectFactorization, x_bar, b) -> np.ndarray:
    """Jacobian assembled from an approximate inner solution x_bar.

    Identical to :func:`exact_jacobian` except that the inner solution and
    its data residual are evaluated at x_bar; feeding the exact solution
    reproduces the exact Jacobian bit for bit.
    """
    return _jacobian_columns(model, _check_y(model, y), fact, np.asarray(x_bar, float), b)


def gradient(J, f_vec) -> np.ndarray:
    """Gradient J^T f of the half squared norm of the reduced residual."""
    return np.asarray(J, dtype=float).T @ np.asarray(f_vec, dtype=float)


def gauss_newton_step(J, g) -> np.ndarray:
    """Solve the small problem min_s ||J s + g||_2 by QR factorization."""
    J = np.asarray(J, dtype=float)
    g = np.asarray(g, dtype=float)
    Q, R = np.linalg.qr(J)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag.min() <= J.shape[0] * _EPS * diag.max():
        raise SingularStepError(
            f"step system is rank deficient (column scales {np.array2string(diag, precision=3)})"
        )
    return scipy.linalg.solve_triangular(R, -(Q.T @ g))


def _check_y(model: SeparableModel, y) -> np.ndarray:
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (model.r,):
        raise ValueError(f"y must have length {model.r}, got shape {y.shape}")
    return y


def _check_b(model: SeparableModel, b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape != (model.m,):
        raise ValueError(f"b must have length {model.m}, got shape {b.shape}")
    return b


def genvarpro(model: SeparableModel, b, L: LinearOperator, lam: float, y0,
              opts: OuterOptions | None = None) -> SolverTrace:
    """Gauss-Newton on the reduced functional with exact inner solves.

    Each iteration solves the normal equations for x(y), assembles the
    analytic Jacobian, and takes a full (undamped) Gauss-Newton step.
    Inner-solver failures abort with a partial trace and an error status.
    """
    opts = opts or OuterOptions()
    y = _check_y(model, y0)
    b = _check_b(model, b)
    if not model.is_feasible(y):
        raise ValueError(f"initial guess {y} is infeasible")
    d = np.concatenate([b, np.zeros(L.rows)])
    trace = SolverTrace()

    def evaluate(yk):
        S = stack(model.operator(yk), L, lam)
        fact = DirectFactorization(S)
        x = fact.solve_rhs(b)
        fvec = S.matvec(x) - d
        J = exact_jacobian(model, yk, fact, x, b)
        return x, fvec, J

    for k in range(opts.max_outer_iterations):
        tic = time.perf_counter()
        if not model.is_feasible(y):
            trace.warnings.append(f"iteration {k}: iterate {y} left the feasible region")
            trace.status = "infeasible-iterate"
            return trace
        try:
            x, fvec, J = evaluate(y)
        except SingularSystemError as exc:
            trace.warnings.append(f"iteration {k}: {exc}")
            trace.status = "inner-failure"
            return trace
        grad = gradient(J, fvec)
        rec = IterationRecord(k=k, y=y.copy(), x=x, f_value=0.5 * float(fvec @ fvec),
                              gradient=grad)
        trace.records.append(rec)
        if float(np.linalg.norm(grad)) <= opts.gradient_tolerance:
            rec.seconds = time.perf_counter() - tic
            trace.status = "gradient-tolerance"
            return trace
        try:
            t = gauss_newton_step(J, fvec)
        except SingularStepError as exc:
            rec.seconds = time.perf_counter() - tic
            trace.warnings.append(f"iteration {k}: {exc}")
            trace.status = "singular-step"
            return trace
        rec.step = t
        rec.seconds = time.perf_counter() - tic
        y = y + t
        if float(np.linalg.norm(t)) <= opts.step_tolerance:
            trace.status = "step-tolerance"
            break
    else:
        trace.status = "max-iterations"

    # Closing record at the final iterate (no step taken from it).
    tic = time.perf_counter()
    if not model.is_feasible(y):
        trace.warnings.append(f"final iterate {y} left the feasible region")
        trace.status = "infeasible-iterate"
        return trace
    try:
        x, fvec, J = evaluate(y)
    except SingularSystemError as exc:
        trace.warnings.append(f"final iterate: {exc}")
        trace.status = "inner-failure"
        return trace
    rec = IterationRecord(k=len(trace.records), y=y.copy(), x=x,
                          f_value=0.5 * float(fvec @ fvec), gradient=gradient(J, fvec),
                          seconds=time.perf_counter() - tic)
    trace.records.append(rec)
    return trace


def inexact_genvarpro(model: SeparableModel, b, L: LinearOperator, lam: float, y0,
                      opts: OuterOptions) -> SolverTrace:
    """Gauss-Newton with LSQR inner solves at a scheduled tolerance.

    Iteration k solves the inner problem to tolerance eps^(k), forms the
    approximate residual and Jacobian from the LSQR iterate, and steps.
    LSQR hitting its iteration cap is recorded as a warning and the run
    continues with the best available iterate.
    """
    if opts.schedule is None:
        raise ValueError("inexact_genvarpro requires OuterOptions.schedule")
    y = _check_y(model, y0)
    b = _check_b(model, b)
    if not model.is_feasible(y):
        raise ValueError(f"initial guess {y} is infeasible")
    d = np.concatenate([b, np.zeros(L.rows)])
    trace = SolverTrace()

    eps0 = opts.schedule.value(0)
    kappa0 = condition_number(stack(model.operator(y), L, lam))
    if eps0 * kappa0 >= 1.0:
        warnings.warn(
            f"initial tolerance times condition number is {eps0 * kappa0:.3g} >= 1; "
            "inner-solve error bounds do not apply",
            ToleranceWarning,
            stacklevel=2,
        )

    def evaluate(yk, eps_k):
        S = stack(model.operator(yk), L, lam)
        fact = DirectFactorization(S)
        sol = lsqr_solve(S, d, LsqrOptions(tolerance=eps_k,
                                           max_iterations=opts.lsqr_max_iterations,
                                           norm_estimate_mode=opts.norm_estimate_mode))
        g = S.matvec(sol.x_bar) - d
        Jbar = approx_jacobian(model, yk, fact, sol.x_bar, b)
        return fact, sol, g, Jbar

    def make_record(k, yk, eps_k, fact, sol, g, Jbar):
        rec = IterationRecord(k=k, y=yk.copy(), x=sol.x_bar,
                              f_value=0.5 * float(g @ g), gradient=gradient(Jbar, g),
                              epsilon=eps_k, inner_iterations=sol.iterations,
                              inner_criterion=sol.achieved_criterion,
                              inner_converged=sol.converged)
        if not sol.converged:
            trace.warnings.append(
                f"iteration {k}: LSQR reached its iteration cap with criterion "
                f"{sol.achieved_criterion:.3e} >= tolerance {eps_k:.3e}"
            )
        if opts.diagnostic:
            x_exact = fact.solve_rhs(b)
            fvec = fact.op.matvec(x_exact) - d
            J = exact_jacobian(model, yk, fact, x_exact, b)
            rec.x_exact = x_exact
            rec.gradient_exact = gradient(J, fvec)
            svals = np.linalg.svd(fact.dense, compute_uv=False)
            rec.op_norm = float(svals[0])
            rec.kappa = float(svals[0] / svals[-1])
        return rec

    for k in range(opts.max_outer_iterations):
        tic = time.perf_counter()
        eps_k = opts.schedule.value(k)
        if not model.is_feasible(y):
            trace.warnings.append(f"iteration {k}: iterate {y} left the feasible region")
            trace.status = "infeasible-iterate"
            return trace
        try:
            fact, sol, g, Jbar = evaluate(y, eps_k)
        except SingularSystemError as exc:
            trace.warnings.append(f"iteration {k}: {exc}")
            trace.status = "inner-failure"
            return trace
        rec = make_record(k, y, eps_k, fact, sol, g, Jbar)
        trace.records.append(rec)
        if float(np.linalg.norm(rec.gradient)) <= opts.gradient_tolerance:
            rec.seconds = time.perf_counter() - tic
            trace.status = "gradient-tolerance"
            return trace
        try:
            t = gauss_newton_step(Jbar, g)
        except SingularStepError as exc:
            rec.seconds = time.perf_counter() - tic
            trace.warnings.append(f"iteration {k}: {exc}")
            trace.status = "singular-step"
            return trace
        rec.step = t
        rec.seconds = time.perf_counter() - tic
        y = y + t
        if float(np.linalg.norm(t)) <= opts.step_tolerance:
            trace.status = "step-tolerance"
            break
    else:
        trace.status = "max-iterations"

    tic = time.perf_counter()
    k_final = len(trace.records)
    eps_final = opts.schedule.value(k_final)
    if not model.is_feasible(y):
        trace.warnings.append(f"final iterate {y} left the feasible region")
        trace.status = "infeasible-iterate"
        return trace
    try:
        fact, sol, g, Jbar = evaluate(y, eps_final)
    except SingularSystemError as exc:
        trace.warnings.append(f"final iterate: {exc}")
        trace.status = "inner-failure"
        return trace
    rec = make_record(k_final, y, eps_final, fact, sol, g, Jbar)
    rec.seconds = time.perf_counter() - tic
    trace.records.append(rec)
    return trace
