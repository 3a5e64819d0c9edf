"""Shared fixtures: the default benchmark, solver traces, and random corpora.

The expensive traces are session-scoped so the acceptance suite and the
module tests share one run each.
"""

import numpy as np
import pytest

import varproj as vp
from varproj.inner_solvers import NORM_MODE_EXPLICIT

EPSILON0 = {2.0: 1.8718e-4, 4.0: 1.1239e-4}


@pytest.fixture(scope="session")
def problem():
    return vp.build_problem(vp.BenchConfig())


@pytest.fixture(scope="session")
def small_problem():
    # Mildly blurred, quick to solve; used where the full benchmark is overkill.
    return vp.build_problem(vp.BenchConfig(n=48, sigma_true=2.0, lam=0.02, rng_seed=7))


def run_exact(problem, y0, iterations=50):
    opts = vp.OuterOptions(max_outer_iterations=iterations, step_tolerance=0.0)
    trace = vp.genvarpro(problem.model, problem.b, problem.L, problem.lam,
                         np.array([y0]), opts)
    assert not trace.failed
    return trace


def run_inexact(problem, y0, kind, eps0, iterations=50, diagnostic=True):
    if kind == "fixed-small":
        schedule = vp.ToleranceSchedule("fixed-small")
    else:
        schedule = vp.ToleranceSchedule(kind, eps0)
    opts = vp.OuterOptions(max_outer_iterations=iterations, step_tolerance=0.0,
                           schedule=schedule, diagnostic=diagnostic,
                           norm_estimate_mode=NORM_MODE_EXPLICIT)
    trace = vp.inexact_genvarpro(problem.model, problem.b, problem.L, problem.lam,
                                 np.array([y0]), opts)
    assert not trace.failed
    return trace


@pytest.fixture(scope="session")
def gp_trace_y2(problem):
    return run_exact(problem, 2.0)


@pytest.fixture(scope="session")
def gp_trace_y4(problem):
    return run_exact(problem, 4.0)


@pytest.fixture(scope="session")
def ab_trace_y2(problem):
    return run_inexact(problem, 2.0, "exponential", EPSILON0[2.0])


@pytest.fixture(scope="session")
def ab_trace_y4(problem):
    return run_inexact(problem, 4.0, "exponential", EPSILON0[4.0])


@pytest.fixture(scope="session")
def b_trace_y2(problem):
    return run_inexact(problem, 2.0, "constant", EPSILON0[2.0])


@pytest.fixture(scope="session")
def b_trace_y4(problem):
    return run_inexact(problem, 4.0, "constant", EPSILON0[4.0])


@pytest.fixture(scope="session")
def lb_trace_y2(problem):
    return run_inexact(problem, 2.0, "linear", EPSILON0[2.0])


@pytest.fixture(scope="session")
def s_trace_y2(problem):
    return run_inexact(problem, 2.0, "fixed-small", None)


def random_stacked(rng, m=None, n=None, q=None, lam=None):
    """One random full-column-rank stacked system for the certificate corpora."""
    m = int(rng.integers(5, 41)) if m is None else m
    n = int(rng.integers(2, min(m, 20) + 1)) if n is None else n
    q = int(rng.integers(0, n)) if q is None else q
    lam = float(rng.uniform(0.1, 2.0)) if lam is None else lam
    A = vp.DenseOperator(rng.standard_normal((m, n)))
    L = vp.DenseOperator(rng.standard_normal((q, n)))
    return vp.stack(A, L, lam)


@pytest.fixture(scope="session")
def certificate_corpus():
    """200 random stacked systems solved by LSQR with epsilon*kappa < 1/2.

    Each entry carries the dense operator, data, tolerance, true 2-norm,
    condition number, and the inner solution (explicit-SVD stopping mode).
    """
    rng = np.random.default_rng(20240)
    corpus = []
    while len(corpus) < 200:
        op = random_stacked(rng)
        dense = op.to_dense()
        svals = np.linalg.svd(dense, compute_uv=False)
        if svals[-1] <= 0 or svals[0] / svals[-1] > 1e6:
            continue
        kappa = float(svals[0] / svals[-1])
        d = rng.standard_normal(op.rows)
        eps = 10.0 ** rng.uniform(-10, -2)
        eps = min(eps, 0.5 / kappa)
        sol = vp.lsqr_solve(op, d, vp.LsqrOptions(tolerance=eps,
                                                  norm_estimate_mode=NORM_MODE_EXPLICIT))
        corpus.append({
            "op": op, "dense": dense, "d": d, "eps": eps,
            "norm": float(svals[0]), "kappa": kappa, "sol": sol,
        })
    return corpus
