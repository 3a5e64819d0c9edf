"""Linear operators for regularized separable least-squares problems.

The solvers only need a small operator algebra: dense matrices, symmetric
Toeplitz convolutions with a normalized Gaussian kernel, the first-difference
regularizer, diagonal row scaling, and the vertical stack [A; lambda*L] that
turns a Tikhonov-regularized problem into an ordinary least-squares operator.
Operators are matrix-free by contract but cheap to materialize at the scales
used here; they are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.linalg import toeplitz


def _as_vector(v, length: int, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (length,):
        raise ValueError(f"{what}: expected a vector of length {length}, got shape {v.shape}")
    return v


class LinearOperator:
    """A rows-by-cols linear map with forward and adjoint actions.

    Subclasses implement ``_matvec`` and ``_rmatvec``. ``to_dense`` has a
    generic column-by-column fallback that structured subclasses override.
    """

    def __init__(self, rows: int, cols: int):
        rows = int(rows)
        cols = int(cols)
        if rows < 0 or cols < 1:
            raise ValueError(f"invalid operator shape ({rows}, {cols})")
        self.rows = rows
        self.cols = cols

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def matvec(self, v) -> np.ndarray:
        return self._matvec(_as_vector(v, self.cols, "matvec input"))

    def rmatvec(self, w) -> np.ndarray:
        return self._rmatvec(_as_vector(w, self.rows, "rmatvec input"))

    def to_dense(self) -> np.ndarray:
        out = np.empty((self.rows, self.cols))
        e = np.zeros(self.cols)
        for j in range(self.cols):
            e[j] = 1.0
            out[:, j] = self._matvec(e)
            e[j] = 0.0
        return out

    def _matvec(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _rmatvec(self, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class DenseOperator(LinearOperator):
    """Operator backed by an explicit matrix (copied and frozen)."""

    def __init__(self, a):
        a = np.array(a, dtype=float)
        if a.ndim != 2:
            raise ValueError("DenseOperator expects a 2-d array")
        a.setflags(write=False)
        super().__init__(a.shape[0], a.shape[1])
        self.a = a

    def _matvec(self, v):
        return self.a @ v

    def _rmatvec(self, w):
        return self.a.T @ w

    def to_dense(self):
        return self.a


class SymmetricToeplitzOperator(LinearOperator):
    """Symmetric Toeplitz operator defined by its first row."""

    def __init__(self, first_row):
        first_row = np.array(first_row, dtype=float)
        if first_row.ndim != 1 or first_row.size < 1:
            raise ValueError("first_row must be a nonempty 1-d array")
        n = first_row.size
        super().__init__(n, n)
        first_row.setflags(write=False)
        self.first_row = first_row
        dense = toeplitz(first_row)
        dense.setflags(write=False)
        self._dense = dense

    def _matvec(self, v):
        return self._dense @ v

    def _rmatvec(self, w):
        # symmetric: the adjoint action is the forward action
        return self._dense @ w

    def to_dense(self):
        return self._dense


class FirstDifferenceOperator(LinearOperator):
    """The (n-1) x n forward-difference matrix: -1 on the diagonal, +1 above."""

    def __init__(self, n: int):
        if n < 2:
            raise ValueError(f"first difference needs n >= 2, got n={n}")
        super().__init__(n - 1, n)

    def _matvec(self, v):
        return v[1:] - v[:-1]

    def _rmatvec(self, w):
        out = np.zeros(self.cols)
        out[:-1] -= w
        out[1:] += w
        return out

    def to_dense(self):
        d = np.zeros((self.rows, self.cols))
        i = np.arange(self.rows)
        d[i, i] = -1.0
        d[i, i + 1] = 1.0
        return d


class RowScaledOperator(LinearOperator):
    """diag(weights) @ base; used for the reweighted difference regularizer."""

    def __init__(self, weights, base: LinearOperator):
        weights = np.array(weights, dtype=float)
        if weights.shape != (base.rows,):
            raise ValueError(
                f"weights must have length {base.rows}, got shape {weights.shape}"
            )
        super().__init__(base.rows, base.cols)
        weights.setflags(write=False)
        self.weights = weights
        self.base = base

    def _matvec(self, v):
        return self.weights * self.base.matvec(v)

    def _rmatvec(self, w):
        return self.base.rmatvec(self.weights * w)

    def to_dense(self):
        return self.weights[:, None] * self.base.to_dense()


class StackedOperator(LinearOperator):
    """The (m+q) x n vertical stack [A; lambda*L].

    The forward action is the plain concatenation of the two block actions;
    the adjoint is A^T w_top + lambda * L^T w_bottom. With lambda = 0 the
    bottom block of the forward action is identically zero.
    """

    def __init__(self, top: LinearOperator, bottom: LinearOperator, lam: float):
        if top.cols != bottom.cols:
            raise ValueError(
                f"column mismatch: top has {top.cols} columns, bottom has {bottom.cols}"
            )
        lam = float(lam)
        if not lam >= 0.0:
            raise ValueError(f"lambda must be nonnegative, got {lam}")
        super().__init__(top.rows + bottom.rows, top.cols)
        self.top = top
        self.bottom = bottom
        self.lam = lam

    @property
    def m(self) -> int:
        return self.top.rows

    @property
    def q(self) -> int:
        return self.bottom.rows

    def _matvec(self, v):
        return np.concatenate([self.top.matvec(v), self.lam * self.bottom.matvec(v)])

    def _rmatvec(self, w):
        return self.top.rmatvec(w[: self.m]) + self.lam * self.bottom.rmatvec(w[self.m :])

    def to_dense(self):
        return np.vstack([self.top.to_dense(), self.lam * self.bottom.to_dense()])


def stack(top: LinearOperator, bottom: LinearOperator, lam: float) -> StackedOperator:
    """Stack a forward operator on top of a regularizer scaled by ``lam``."""
    return StackedOperator(top, bottom, lam)


def first_difference(n: int) -> FirstDifferenceOperator:
    """The (n-1) x n discrete first-derivative operator."""
    return FirstDifferenceOperator(n)


def _validate_kernel_args(sigma: float, n: int) -> None:
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if n < 2:
        raise ValueError(f"kernel needs n >= 2, got n={n}")


def _gaussian_generator(sigma: float, n: int) -> tuple[np.ndarray, float]:
    offsets = np.arange(n, dtype=float)
    g = np.exp(-(offsets**2) / (2.0 * sigma**2))
    return g, float(g.sum())


def gaussian_toeplitz(sigma: float, n: int) -> SymmetricToeplitzOperator:
    """Normalized Gaussian blur as an n x n symmetric Toeplitz operator.

    The first row is c * exp(-(j-1)^2 / (2 sigma^2)) for j = 1..n, with c the
    reciprocal of the unnormalized row sum, so the first row sums to one.

    Parameters
    ----------
    sigma : positive kernel width.
    n : signal length, at least 2.
    """
    _validate_kernel_args(sigma, n)
    g, total = _gaussian_generator(sigma, n)
    return SymmetricToeplitzOperator(g / total)


def gaussian_toeplitz_derivative(sigma: float, n: int) -> SymmetricToeplitzOperator:
    """Entrywise derivative of ``gaussian_toeplitz`` with respect to sigma.

    Differentiates c(sigma) * exp(-(j-1)^2 / (2 sigma^2)) analytically,
    including the sigma-dependence of the normalizer c, so the derivative
    first row sums to zero.
    """
    _validate_kernel_args(sigma, n)
    offsets = np.arange(n, dtype=float)
    g, total = _gaussian_generator(sigma, n)
    dg = g * offsets**2 / sigma**3
    dtotal = float(dg.sum())
    return SymmetricToeplitzOperator(dg / total - g * (dtotal / total**2))


def finite_difference_derivative(
    builder: Callable[[np.ndarray], LinearOperator],
    y: np.ndarray,
    j: int,
    step: float | None = None,
) -> DenseOperator:
    """Central-difference d A / d y_j for models without analytic derivatives.

    The default step is max(1e-6, 1e-7 * |y_j|).
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    h = step if step is not None else max(1e-6, 1e-7 * abs(y[j]))
    yp = y.copy()
    yp[j] += h
    ym = y.copy()
    ym[j] -= h
    return DenseOperator((builder(yp).to_dense() - builder(ym).to_dense()) / (2.0 * h))


def fd_derivative_builder(builder: Callable[[np.ndarray], LinearOperator]):
    """Wrap an operator builder into a (y, j) -> dA/dy_j derivative builder."""
    return lambda y, j: finite_difference_derivative(builder, y, j)
