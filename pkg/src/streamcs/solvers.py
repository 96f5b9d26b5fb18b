"""Sparse-recovery solvers: proximal-gradient LASSO, OMP, restricted LSE.

The LASSO objective is ``||Ax - y||_2^2 + lam * ||x||_1`` (no 1/2 factor),
so the gradient of the smooth part is 2 A^T (Ax - y) and the optimality
certificate compares g = A^T (y - Ax) against lam/2:

    |g_i - (lam/2) sgn(x_i)| <= eps   on the nonzero set,
    |g_j| < lam/2 + eps               on the zero set.

The accelerated solver accepts a momentum step only if the objective does
not increase (monotone variant); plain acceleration is available behind a
flag. Warm starts are plain initial iterates; an already eps-optimal start
returns immediately with zero iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import SingularSystemError, gram_solve, spectral_norm_sq

__all__ = [
    "LassoProblem",
    "SolverReport",
    "soft_threshold",
    "lasso_objective",
    "kkt_residual",
    "kkt_satisfied",
    "fista",
    "omp",
    "lse_on_support",
]


@dataclass
class LassoProblem:
    a: np.ndarray  # (m, n) design matrix, possibly a rotated view
    y: np.ndarray  # (m,) measurements
    lam: float
    lip: float | None = None  # cached lambda_max(A^T A); computed if None

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.a.shape[0] != self.y.shape[0]:
            raise ValueError(
                f"design/measurement mismatch: {self.a.shape} vs {self.y.shape}"
            )


@dataclass
class SolverReport:
    x_hat: np.ndarray
    iterations: int
    kkt_residual: float
    objective: float
    converged: bool


def soft_threshold(v, t):
    """sign(v) * max(|v| - t, 0); elementwise on arrays."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("threshold must be >= 0")
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def lasso_objective(a, y, lam, x) -> float:
    r = a @ x - y
    return float(r @ r + lam * np.sum(np.abs(x)))


def _kkt_parts(g: np.ndarray, lam: float, x: np.ndarray) -> tuple[float, float]:
    """(on-support residual, zero-set excess |g| - lam/2) for certificate checks."""
    on = x != 0.0
    res_on = float(np.max(np.abs(g[on] - 0.5 * lam * np.sign(x[on])))) if on.any() else 0.0
    off = ~on
    res_off = float(np.max(np.abs(g[off])) - 0.5 * lam) if off.any() else -np.inf
    return res_on, res_off


def kkt_residual(a, y, lam, x) -> float:
    """Smallest eps certified by the optimality test, recomputed from scratch."""
    g = a.T @ (y - a @ x)
    res_on, res_off = _kkt_parts(g, lam, x)
    return max(res_on, res_off, 0.0)


def kkt_satisfied(a, y, lam, x, eps: float) -> bool:
    g = a.T @ (y - a @ x)
    res_on, res_off = _kkt_parts(g, lam, x)
    return res_on <= eps and res_off < eps  # zero-set test is strict


def fista(
    prob: LassoProblem,
    x0,
    eps: float | None = None,
    max_iter: int = 10_000,
    monotone: bool = True,
) -> SolverReport:
    """Accelerated proximal-gradient LASSO with eps-optimality termination.

    Returns the first iterate passing the optimality certificate, or the
    last one with ``converged=False`` once ``max_iter`` is exhausted (a
    reported condition, not an error). Default eps is 1e-6 * lam.
    """
    a, y, lam = prob.a, prob.y, prob.lam
    if eps is None:
        eps = 1e-6 * lam if lam > 0 else 1e-9
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    lip = prob.lip if prob.lip is not None else spectral_norm_sq(a)
    lip = max(float(lip), np.finfo(float).tiny)
    shrink = 0.5 * lam / lip  # prox threshold for step size 1/(2L)

    x = np.array(x0, dtype=float)
    if x.shape != (a.shape[1],):
        raise ValueError(f"start point shape {x.shape} does not match n={a.shape[1]}")

    r = a @ x - y
    g = a.T @ r
    res_on, res_off = _kkt_parts(-g, lam, x)
    if res_on <= eps and res_off < eps:
        obj = float(r @ r + lam * np.sum(np.abs(x)))
        return SolverReport(x, 0, max(res_on, res_off, 0.0), obj, True)

    x_obj = float(r @ r + lam * np.sum(np.abs(x)))
    v = x
    t = 1.0
    converged = False
    iterations = 0
    for k in range(1, max_iter + 1):
        iterations = k
        rv = a @ v - y
        gv = a.T @ rv
        u = soft_threshold(v - gv / lip, shrink)
        ru = a @ u - y
        u_obj = float(ru @ ru + lam * np.sum(np.abs(u)))

        if monotone and u_obj > x_obj:
            x_new, new_obj, accepted = x, x_obj, False
        else:
            x_new, new_obj, accepted = u, u_obj, True

        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        v = x_new + (t / t_next) * (u - x_new) + ((t - 1.0) / t_next) * (x_new - x)
        t = t_next
        x, x_obj = x_new, new_obj

        if accepted:
            gk = -(a.T @ ru)  # A^T (y - A u)
            res_on, res_off = _kkt_parts(gk, lam, u)
            if res_on <= eps and res_off < eps:
                converged = True
                break

    if converged:
        residual = max(res_on, res_off, 0.0)  # computed at x on the break iteration
    else:
        residual = kkt_residual(a, y, lam, x)
    return SolverReport(x, iterations, residual, x_obj, converged)


def omp(a, y, max_atoms: int, gamma: float = 0.0) -> np.ndarray:
    """Orthogonal matching pursuit for noiseless sparse recovery.

    Greedy selection of the column with the largest absolute correlation to
    the residual (columns are normalized internally for the selection only),
    followed by a least-squares refit on the selected set. Stops when the
    residual norm drops to ``gamma`` or ``max_atoms`` columns are chosen.
    """
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = a.shape
    if not (0 < max_atoms < m):
        raise ValueError(f"need 0 < max_atoms < m, got {max_atoms} vs m={m}")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")

    x = np.zeros(n)
    if np.linalg.norm(y) <= gamma:
        return x

    norms = np.linalg.norm(a, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    selected: list[int] = []
    coef = np.zeros(0)
    r = y
    for _ in range(max_atoms):
        corr = np.abs(a.T @ r) / safe
        corr[norms == 0.0] = 0.0
        if selected:
            corr[selected] = 0.0  # residual is orthogonal to chosen columns
        s = int(np.argmax(corr))
        if corr[s] == 0.0:
            break
        selected.append(s)
        coef = gram_solve(a[:, selected], y)
        r = y - a[:, selected] @ coef
        if np.linalg.norm(r) <= gamma:
            break

    x[selected] = coef
    return x


def lse_on_support(a, y, support) -> np.ndarray:
    """Least-squares estimate restricted to ``support``; zero elsewhere."""
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = a.shape
    idx = np.asarray(sorted(set(int(j) for j in support)), dtype=int)
    x = np.zeros(n)
    if idx.size == 0:
        return x
    if idx[0] < 0 or idx[-1] >= n:
        raise IndexError(f"support indices out of range [0, {n})")
    if idx.size >= m:
        raise SingularSystemError(
            f"support size {idx.size} >= m={m}: system not overdetermined"
        )
    x[idx] = gram_solve(a[:, idx], y)
    return x
