"""Dense linear-algebra kernels shared across the package.

Everything here operates on plain float64 numpy arrays and is pure:
deterministic given the arguments, no hidden state. Matrix/vector
validity (finite entries, positive dimensions) is the responsibility of
whoever constructs the arrays; these kernels only check the contracts
that guard against caller bugs (shape agreement, rank).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "SingularSystemError",
    "matvec",
    "gram_solve",
    "spectral_norm_sq",
]


class SingularSystemError(ArithmeticError):
    """A least-squares system was rank deficient (pivot under tolerance)."""


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-d matrix, got shape {a.shape}")
    return a


def _as_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {x.shape}")
    return x


def matvec(a, x) -> np.ndarray:
    """Exact dense product A @ x with an explicit dimension check."""
    a = _as_matrix(a)
    x = _as_vector(x)
    if a.shape[1] != x.shape[0]:
        raise ValueError(f"matvec dimension mismatch: {a.shape} @ {x.shape}")
    return a @ x


def gram_solve(a_cols, y) -> np.ndarray:
    """Least-squares coefficients of y against the columns of ``a_cols``.

    Solves (A^T A) c = A^T y through a Cholesky factorization of the Gram
    matrix. Requires at least as many rows as columns; a pivot falling
    below 1e-12 * max|Gram entry| raises :class:`SingularSystemError`.
    """
    a = _as_matrix(a_cols)
    y = _as_vector(y)
    if a.shape[0] != y.shape[0]:
        raise ValueError(f"gram_solve dimension mismatch: {a.shape} vs {y.shape}")
    if a.shape[1] > a.shape[0]:
        raise SingularSystemError(
            f"more columns than rows ({a.shape[1]} > {a.shape[0]}): rank deficient"
        )

    gram = a.T @ a
    rhs = a.T @ y
    tol = 1e-12 * float(np.max(np.abs(gram)))
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"Gram matrix not positive definite: {exc}") from exc
    # diag(L)^2 are the factorization pivots
    if float(np.min(np.diagonal(chol)) ** 2) <= tol:
        raise SingularSystemError("Gram pivot below tolerance: rank deficient columns")
    z = np.linalg.solve(chol, rhs)
    return np.linalg.solve(chol.T, z)


def spectral_norm_sq(a, iters: int = 100, seed: int = 0) -> float:
    """Power-iteration estimate of the largest eigenvalue of A^T A.

    The estimate is a Rayleigh quotient of the PSD matrix A^T A, hence it
    increases monotonically with ``iters`` and never exceeds the true
    eigenvalue. The start vector is drawn from a generator seeded with
    ``seed`` so repeated calls are bit-identical.
    """
    a = _as_matrix(a)
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(a.shape[1])
    nv = np.linalg.norm(v)
    if nv == 0.0:  # absurdly unlikely; keep the contract total
        v[0] = 1.0
        nv = 1.0
    v /= nv
    lam = 0.0
    for _ in range(iters):
        w = a @ v
        lam = float(w @ w)
        u = a.T @ w
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0  # v in the null space; for the zero matrix this is exact
        v = u / nu
    w = a @ v
    return max(lam, float(w @ w))
