"""Inner solvers for the regularized linear subproblem min_x ||S x - d||_2.

Two routes are provided. LSQR (Golub-Kahan bidiagonalization) stops on the
relative-gradient test ||S^T r|| / (||r|| ||S||) < epsilon, which certifies
that the returned iterate solves a least-squares problem whose operator is a
rank-one perturbation of S of norm below epsilon * ||S||. The direct route
factors the normal equations S^T S once and reuses the factorization for
pseudoinverse and projector applications needed by Jacobian assembly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .linops import LinearOperator, StackedOperator

NORM_MODE_INTERNAL = "internal-bidiagonal"
NORM_MODE_EXPLICIT = "explicit-svd"

_EPS = float(np.finfo(float).eps)


class NumericalBreakdownError(RuntimeError):
    """LSQR encountered non-finite quantities."""


class SingularSystemError(RuntimeError):
    """The normal equations are not numerically positive definite."""


class RankDeficiencyError(RuntimeError):
    """A materialized operator is numerically rank deficient."""


@dataclass(frozen=True)
class LsqrOptions:
    """Stopping tolerance and controls for :func:`lsqr_solve`.

    ``norm_estimate_mode`` selects how ||S|| in the stopping test is
    obtained: ``internal-bidiagonal`` uses the running Frobenius-style
    estimate accumulated by the bidiagonalization, ``explicit-svd`` computes
    the true 2-norm of the materialized operator once up front (intended for
    bound-verification runs).
    """

    tolerance: float
    max_iterations: int = 10000
    norm_estimate_mode: str = NORM_MODE_INTERNAL

    def __post_init__(self):
        if not self.tolerance > 0.0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be at least 1, got {self.max_iterations}")
        mode = str(self.norm_estimate_mode).lower()
        if mode not in (NORM_MODE_INTERNAL, NORM_MODE_EXPLICIT):
            raise ValueError(f"unknown norm_estimate_mode {self.norm_estimate_mode!r}")
        object.__setattr__(self, "norm_estimate_mode", mode)


@dataclass
class InnerSolution:
    """Result of one inner solve.

    ``residual`` is d - S x_bar recomputed from the returned iterate.
    ``achieved_criterion`` is the final value of the stopping test (0.0 for
    the degenerate zero-data and exactly-compatible cases, where the test is
    vacuous but the solution is exact). ``criterion_history`` holds the test
    value at every iteration performed.
    """

    x_bar: np.ndarray
    residual: np.ndarray
    iterations: int
    achieved_criterion: float
    operator_norm_estimate: float
    converged: bool
    criterion_history: np.ndarray


def _sym_ortho(a: float, b: float) -> tuple[float, float, float]:
    """Stable Givens rotation (c, s, r) with r = hypot(a, b)."""
    if b == 0.0:
        return float(np.sign(a)), 0.0, abs(a)
    if a == 0.0:
        return 0.0, float(np.sign(b)), abs(b)
    if abs(b) > abs(a):
        tau = a / b
        s = float(np.sign(b)) / math.sqrt(1.0 + tau * tau)
        c = s * tau
        r = b / s
    else:
        tau = b / a
        c = float(np.sign(a)) / math.sqrt(1.0 + tau * tau)
        s = c * tau
        r = a / c
    return c, s, r


def _trivial_solution(op, d, iterations, criterion, norm_estimate):
    x = np.zeros(op.cols)
    return InnerSolution(
        x_bar=x,
        residual=d.copy(),
        iterations=iterations,
        achieved_criterion=float(criterion),
        operator_norm_estimate=float(norm_estimate),
        converged=True,
        criterion_history=np.empty(0),
    )


def lsqr_solve(op: LinearOperator, d, opts: LsqrOptions) -> InnerSolution:
    """Solve min_x ||op x - d||_2 by LSQR with a relative-gradient stop.

    The stopping test ||op^T r|| / (||r|| ||op||) < opts.tolerance is
    evaluated at every iteration from the explicitly recomputed residual
    r = d - op x. A compatible system whose residual falls to the rounding
    floor stops as converged with criterion 0, since the iterate is then
    exact while the test itself is undefined. If the iteration cap is
    reached, the iterate with the smallest observed criterion is returned
    with ``converged=False``.
    """
    d = _check_rhs(op, d)
    explicit = opts.norm_estimate_mode == NORM_MODE_EXPLICIT
    norm_fixed = None
    if explicit:
        norm_fixed = float(np.linalg.svd(op.to_dense(), compute_uv=False)[0])

    beta = float(np.linalg.norm(d))
    if beta == 0.0:
        return _trivial_solution(op, d, 0, 0.0, norm_fixed if explicit else 0.0)

    u = d / beta
    v = op.rmatvec(u)
    alfa = float(np.linalg.norm(v))
    if alfa == 0.0:
        # d is orthogonal to the range of op: x = 0 is already optimal.
        return _trivial_solution(op, d, 0, 0.0, norm_fixed if explicit else 0.0)

    # Stopping test at the initial iterate x = 0, where ||op^T d|| = alfa*beta.
    norm0 = norm_fixed if explicit else alfa
    crit = alfa / norm0
    if crit < opts.tolerance:
        return _trivial_solution(op, d, 0, crit, norm0)

    v = v / alfa
    w = v.copy()
    x = np.zeros(op.cols)
    rhobar = alfa
    phibar = beta
    anorm2 = 0.0
    history: list[float] = []
    best_crit = math.inf
    best_x = x.copy()
    converged = False
    itn = 0
    # Give up once the criterion stops improving for this many iterations:
    # it has hit its rounding floor and the tolerance is unreachable.
    stall_window = max(200, 4 * op.cols)
    stall = 0

    while itn < opts.max_iterations:
        itn += 1

        # One Golub-Kahan step: beta*u = op*v - alfa*u, alfa*v = op^T*u - beta*v.
        u = op.matvec(v) - alfa * u
        beta = float(np.linalg.norm(u))
        anorm2 += alfa * alfa + beta * beta
        if beta > 0.0:
            u = u / beta
            v = op.rmatvec(u) - beta * v
            alfa = float(np.linalg.norm(v))
            if alfa > 0.0:
                v = v / alfa

        c, s, rho = _sym_ortho(rhobar, beta)
        theta = s * alfa
        rhobar = -c * alfa
        phi = c * phibar
        phibar = s * phibar

        x = x + (phi / rho) * w
        w = v - (theta / rho) * w

        r = d - op.matvec(x)
        rnorm = float(np.linalg.norm(r))
        grad_norm = float(np.linalg.norm(op.rmatvec(r)))
        if not (math.isfinite(rnorm) and math.isfinite(grad_norm)):
            raise NumericalBreakdownError(
                f"non-finite residual quantities at LSQR iteration {itn}"
            )
        op_norm = norm_fixed if explicit else math.sqrt(anorm2)

        # Compatible system: the residual has hit the rounding floor, so the
        # iterate is exact and the relative-gradient test is vacuous.
        floor = 10.0 * _EPS * (np.linalg.norm(d) + op_norm * np.linalg.norm(x))
        crit = 0.0 if rnorm <= floor else grad_norm / (rnorm * op_norm)
        history.append(crit)
        stall = 0 if crit < 0.9 * best_crit else stall + 1
        if crit < best_crit:
            best_crit = crit
            best_x = x.copy()
        if crit < opts.tolerance:
            converged = True
            break
        if beta == 0.0 or alfa == 0.0:
            # Krylov breakdown: further iterations cannot improve the iterate.
            break
        if stall >= stall_window:
            break

    if converged:
        x_out, achieved = x, crit
    else:
        x_out, achieved = best_x, best_crit
    op_norm_out = norm_fixed if explicit else math.sqrt(anorm2)
    return InnerSolution(
        x_bar=x_out,
        residual=d - op.matvec(x_out),
        iterations=itn,
        achieved_criterion=float(achieved),
        operator_norm_estimate=float(op_norm_out),
        converged=converged,
        criterion_history=np.asarray(history),
    )


def _check_rhs(op: LinearOperator, d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.shape != (op.rows,):
        raise ValueError(f"right-hand side must have length {op.rows}, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise ValueError("right-hand side must be finite")
    return d


class DirectFactorization:
    """Cholesky factorization of S^T S for a stacked operator S.

    Holds the dense materialization of S alongside the factorization; the
    pseudoinverse and projector applications below reuse both. Immutable
    after construction and shareable across threads.
    """

    def __init__(self, op: StackedOperator):
        self.op = op
        dense = np.asarray(op.to_dense(), dtype=float)
        normal = dense.T @ dense
        try:
            self._cho = scipy.linalg.cho_factor(normal, lower=True)
        except scipy.linalg.LinAlgError as exc:
            smallest = float(np.linalg.eigvalsh(normal)[0])
            raise SingularSystemError(
                "normal equations are not positive definite "
                f"(smallest pivot {smallest:.6e})"
            ) from exc
        self.dense = dense

    def solve_normal(self, v) -> np.ndarray:
        """Apply (S^T S)^{-1} to a length-n vector."""
        return scipy.linalg.cho_solve(self._cho, np.asarray(v, dtype=float))

    def solve_rhs(self, b) -> np.ndarray:
        """Inner solution for stacked data [b; 0]: (S^T S)^{-1} A^T b."""
        b = np.asarray(b, dtype=float)
        return self.solve_normal(self.op.top.rmatvec(b))


def direct_solve(op: StackedOperator, b) -> np.ndarray:
    """Exact inner solution of min_x ||[A; lam L] x - [b; 0]|| via the normal equations."""
    return DirectFactorization(op).solve_rhs(b)


def apply_pinv(fact: DirectFactorization, z) -> np.ndarray:
    """Pseudoinverse application (S^T S)^{-1} S^T z."""
    return fact.solve_normal(fact.op.rmatvec(z))


def apply_pinv_transpose(fact: DirectFactorization, w) -> np.ndarray:
    """Transposed-pseudoinverse application S (S^T S)^{-1} w."""
    return fact.op.matvec(fact.solve_normal(w))


def apply_projector_perp(fact: DirectFactorization, z) -> np.ndarray:
    """Orthogonal projection of z onto the complement of range(S)."""
    z = np.asarray(z, dtype=float)
    return z - fact.op.matvec(apply_pinv(fact, z))


def condition_number(op: LinearOperator) -> float:
    """2-norm condition number sigma_max / sigma_min of the materialized operator."""
    s = np.linalg.svd(op.to_dense(), compute_uv=False)
    if s[-1] < 1e-300:
        raise RankDeficiencyError(
            f"operator is numerically rank deficient (smallest singular value {s[-1]:.3e})"
        )
    return float(s[0] / s[-1])


def spectral_norm(op: LinearOperator) -> float:
    """Largest singular value of the materialized operator."""
    return float(np.linalg.svd(op.to_dense(), compute_uv=False)[0])
