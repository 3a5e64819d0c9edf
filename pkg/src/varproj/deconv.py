"""The 1-d blind-deconvolution benchmark used by the test suite and the CLI.

A piecewise ground-truth signal with zero boundary values is blurred by a
normalized Gaussian Toeplitz kernel of unknown width sigma; Gaussian noise is
added and rescaled so the noise-to-signal ratio is exact. The regularizer is
a reweighted first-difference operator L = W D whose diagonal weights
(|D x_true|_i + tau)^(-1/2) make ||L x_true||^2 approximate the total
variation ||D x_true||_1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .linops import (
    LinearOperator,
    RowScaledOperator,
    first_difference,
    gaussian_toeplitz,
    gaussian_toeplitz_derivative,
    stack,
)
from .varpro import SeparableModel


class ConfigError(ValueError):
    """A benchmark or run configuration field is invalid."""


SIGNAL_SPECS = ("piecewise", "gaussian-bumps")

DEFAULT_SEED = 1


@dataclass(frozen=True)
class BenchConfig:
    """Benchmark parameters; the defaults reproduce the standard experiment."""

    n: int = 128
    sigma_true: float = 3.0
    noise_level: float = 0.05
    lam: float = 0.0379
    rng_seed: int = DEFAULT_SEED
    y0: float = 2.0
    tau: float = 1e-8
    x_true_spec: str = "piecewise"

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"n must be at least 2, got {self.n}")
        if not self.sigma_true > 0.0:
            raise ConfigError(f"sigma_true must be positive, got {self.sigma_true}")
        if not self.noise_level >= 0.0:
            raise ConfigError(f"noise_level must be nonnegative, got {self.noise_level}")
        if not self.lam > 0.0:
            raise ConfigError(f"lambda must be positive, got {self.lam}")
        if not self.y0 > 0.0:
            raise ConfigError(f"y0 must be positive, got {self.y0}")
        if not self.tau > 0.0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.x_true_spec not in SIGNAL_SPECS:
            raise ConfigError(f"unknown signal spec {self.x_true_spec!r}")


@dataclass(frozen=True)
class ProblemInstance:
    """A fully built benchmark: model, data, regularizer, and metadata."""

    model: SeparableModel
    b: np.ndarray
    b_true: np.ndarray
    x_true: np.ndarray
    L: LinearOperator
    lam: float
    config: BenchConfig
    noise_ratio: float


def default_signal(n: int, spec: str = "piecewise") -> np.ndarray:
    """Built-in ground-truth signals on n points with exact zero boundaries.

    ``piecewise`` (the default) combines a flat plateau, a linear ramp with a
    jump at its end, and a compactly supported cosine bump, so the difference
    D x has both exact zeros and order-one jumps. ``gaussian-bumps`` is a
    smooth pair of Gaussian humps. All values lie in [0, 1].
    """
    if n < 8:
        raise ConfigError(f"signals need n >= 8, got n={n}")
    t = np.arange(n, dtype=float) / (n - 1)
    x = np.zeros(n)
    if spec == "piecewise":
        x[(t >= 0.15) & (t < 0.35)] = 0.75
        ramp = (t >= 0.45) & (t < 0.60)
        x[ramp] = 0.9 * (t[ramp] - 0.45) / 0.15
        bump = np.abs(t - 0.78) < 0.10
        x[bump] = 0.5 * (1.0 + np.cos(np.pi * (t[bump] - 0.78) / 0.10))
    elif spec == "gaussian-bumps":
        x = 0.9 * np.exp(-((t - 0.30) ** 2) / (2 * 0.06**2))
        x += 0.65 * np.exp(-((t - 0.68) ** 2) / (2 * 0.09**2))
        x[0] = 0.0
        x[-1] = 0.0
    else:
        raise ConfigError(f"unknown signal spec {spec!r}")
    return x


def build_regularizer(x_true, tau: float) -> RowScaledOperator:
    """Reweighted first difference L = W D with W_ii = (|D x_true|_i + tau)^(-1/2).

    The weights make ||L x||^2 = sum_i (D x)_i^2 / (|D x_true|_i + tau), so at
    x = x_true the squared norm approximates ||D x_true||_1; tau keeps the
    weights finite where the true signal is flat.
    """
    if not tau > 0.0:
        raise ConfigError(f"tau must be positive, got {tau}")
    x_true = np.asarray(x_true, dtype=float)
    diff = first_difference(x_true.size)
    weights = 1.0 / np.sqrt(np.abs(diff.matvec(x_true)) + tau)
    return RowScaledOperator(weights, diff)


def gaussian_blur_model(n: int) -> SeparableModel:
    """The benchmark's separable model: the parameter is the kernel width."""
    return SeparableModel(
        m=n,
        n=n,
        r=1,
        operator=lambda y: gaussian_toeplitz(float(y[0]), n),
        derivative=lambda y, j: gaussian_toeplitz_derivative(float(y[0]), n),
        feasible=lambda y: float(y[0]) > 0.0,
    )


def build_problem(cfg: BenchConfig) -> ProblemInstance:
    """Construct the benchmark deterministically from its configuration.

    The noise vector is drawn standard normal and rescaled so that
    ||b - b_true|| / ||b_true|| equals the configured level exactly.
    """
    n = cfg.n
    x_true = default_signal(n, cfg.x_true_spec)
    A = gaussian_toeplitz(cfg.sigma_true, n)
    b_true = A.matvec(x_true)
    if cfg.noise_level > 0.0:
        rng = np.random.default_rng(cfg.rng_seed)
        noise = rng.standard_normal(n)
        noise *= cfg.noise_level * np.linalg.norm(b_true) / np.linalg.norm(noise)
        b = b_true + noise
    else:
        b = b_true.copy()
    ratio = float(np.linalg.norm(b - b_true) / np.linalg.norm(b_true))
    L = build_regularizer(x_true, cfg.tau)
    for arr in (b, b_true, x_true):
        arr.setflags(write=False)
    return ProblemInstance(model=gaussian_blur_model(n), b=b, b_true=b_true,
                           x_true=x_true, L=L, lam=cfg.lam, config=cfg,
                           noise_ratio=ratio)


def stacked_operator(problem: ProblemInstance, y_value: float):
    """The stacked operator [A(y); lam L] of a benchmark at kernel width y."""
    return stack(problem.model.operator(np.array([float(y_value)])), problem.L, problem.lam)


def _objective_at(problem: ProblemInstance, gram_reg: np.ndarray, y_value: float) -> float:
    Ad = problem.model.operator(np.array([float(y_value)])).to_dense()
    normal = Ad.T @ Ad + gram_reg
    b = problem.b
    x = scipy.linalg.cho_solve(scipy.linalg.cho_factor(normal, lower=True), Ad.T @ b)
    misfit = Ad @ x - b
    return 0.5 * float(misfit @ misfit + x @ (gram_reg @ x))


def _regularizer_gram(problem: ProblemInstance) -> np.ndarray:
    Ld = problem.L.to_dense()
    return (problem.lam**2) * (Ld.T @ Ld)


def reduced_objective(problem: ProblemInstance, y_value: float) -> float:
    """Reduced functional value 0.5 ||F(y)||^2 with an exact inner solve."""
    return _objective_at(problem, _regularizer_gram(problem), y_value)


def objective_grid(problem: ProblemInstance, lo: float, hi: float,
                   resolution: float) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate the reduced functional on a uniform grid of kernel widths.

    Uses exact (normal-equations) inner solves at every grid point; the
    regularizer Gram matrix is assembled once and reused.
    """
    if not resolution > 0.0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    count = int(round((hi - lo) / resolution)) + 1
    ys = lo + resolution * np.arange(count)
    gram_reg = _regularizer_gram(problem)
    fs = np.array([_objective_at(problem, gram_reg, y) for y in ys])
    return ys, fs


def grid_minimizer(problem: ProblemInstance, lo: float = 2.0, hi: float = 4.0,
                   resolution: float = 1e-4) -> float:
    """Kernel width minimizing the reduced functional on a uniform grid."""
    ys, fs = objective_grid(problem, lo, hi, resolution)
    return float(ys[int(np.argmin(fs))])
