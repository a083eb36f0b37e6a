"""Lasso solver with a duality-gap stopping rule.

Solves  min_w 0.5 ||x - D w||^2 + lambda ||w||_1  by cyclic coordinate
descent (default) or proximal gradient with a fixed 1/L step. Convergence
is certified by the gap between the primal objective and the dual
objective at a feasible dual point built from the residual.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .dictionary import Dictionary, check_target
from .errors import DimensionError, FeasibilityError, UsageError

_FEAS_TOL = 1e-9


@dataclass(frozen=True)
class LassoProblem:
    dictionary: Dictionary
    x: np.ndarray
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "x", check_target(self.x, self.dictionary.d))
        if not self.lam > 0:
            raise UsageError(f"lambda must be positive, got {self.lam}")


@dataclass(frozen=True)
class SolverConfig:
    gap_tol: float = 1e-8       # relative to 0.5 ||x||^2
    max_iters: int = 100_000
    algorithm: str = "coordinate_descent"

    def __post_init__(self):
        if not self.gap_tol > 0:
            raise UsageError("gap_tol must be positive")
        if self.max_iters < 1:
            raise UsageError("max_iters must be >= 1")
        if self.algorithm not in ("coordinate_descent", "proximal_gradient"):
            raise UsageError(f"unknown algorithm {self.algorithm!r}")


@dataclass
class LassoSolution:
    w: np.ndarray
    theta: np.ndarray
    gap: float
    iterations: int
    solve_seconds: float
    converged: bool = True


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def primal_objective(residual, w, lam):
    return 0.5 * float(residual @ residual) + lam * float(np.abs(w).sum())


def dual_objective(x, theta, lam):
    diff = theta - x / lam
    return 0.5 * float(x @ x) - 0.5 * lam * lam * float(diff @ diff)


def dual_point(problem, w):
    """Feasible dual point from the residual of ``w``.

    theta = (x - D w) / max(lambda, ||D^T (x - D w)||_inf). For an exact
    solution the rescaling is inactive and theta = (x - D w) / lambda.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (problem.dictionary.p,):
        raise DimensionError(
            f"weights have shape {w.shape}, expected ({problem.dictionary.p},)")
    residual = problem.x - problem.dictionary.matvec(w)
    if problem.dictionary.p:
        cinf = problem.dictionary.max_abs_correlation(residual)[0] \
            if np.any(residual) else 0.0
    else:
        cinf = 0.0
    return residual / max(problem.lam, cinf)


def duality_gap(problem, w, theta):
    """P(w) - D(theta); nonnegative for any feasible theta."""
    w = np.asarray(w, dtype=np.float64)
    theta = check_target(theta, problem.dictionary.d)
    if problem.dictionary.p:
        cinf = problem.dictionary.max_abs_correlation(theta)[0] \
            if np.any(theta) else 0.0
        if cinf > 1.0 + _FEAS_TOL:
            raise FeasibilityError(
                f"dual candidate is infeasible: max |a_i^T theta| = {cinf}")
    residual = problem.x - problem.dictionary.matvec(w)
    return primal_objective(residual, w, problem.lam) \
        - dual_objective(problem.x, theta, problem.lam)


def _finish(x, lam, w, r, corr):
    """Feasible dual point, gap, and objectives from the current iterate."""
    cinf = float(np.abs(corr).max()) if corr.size else 0.0
    theta = r / max(lam, cinf)
    gap = primal_objective(r, w, lam) - dual_objective(x, theta, lam)
    return theta, gap


def _solve_cd(A, x, lam, w0, gap_abs, max_iters):
    w = w0.copy()
    r = x - A @ w
    col_sq = np.einsum("ij,ij->j", A, A)
    theta, gap = _finish(x, lam, w, r, A.T @ r)
    if gap <= gap_abs:
        return w, theta, gap, 0, True
    # The gap evaluation costs more than a sweep on small problems, so it
    # backs off exponentially (capped) while sweeps keep running.
    interval = 1
    next_check = 1
    for it in range(1, max_iters + 1):
        delta = _kernels.cd_epoch(A, w, r, lam, col_sq)
        if it < next_check and delta > 0.0 and it < max_iters:
            continue
        theta, gap = _finish(x, lam, w, r, A.T @ r)
        if gap <= gap_abs:
            return w, theta, gap, it, True
        interval = min(2 * interval, 16)
        next_check = it + interval
    return w, theta, gap, max_iters, False


def _power_lipschitz(A, iters=100, tol=1e-10):
    """Largest eigenvalue of A^T A by power iteration."""
    rng = np.random.default_rng(0)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    ev = 0.0
    for _ in range(iters):
        u = A.T @ (A @ v)
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0
        v_new = u / nu
        if abs(nu - ev) <= tol * max(nu, 1.0):
            ev = nu
            break
        ev = nu
        v = v_new
    return ev


def _solve_ista(A, x, lam, w0, gap_abs, max_iters):
    L = _power_lipschitz(A)
    if L <= 0.0:
        w = np.zeros(A.shape[1])
        theta, gap = _finish(x, lam, w, x.copy(), A.T @ x)
        return w, theta, gap, 0, True
    L *= 1.0 + 1e-10  # guard against power-iteration underestimate
    step = 1.0 / L
    w = w0.copy()
    r = x - A @ w
    theta, gap = _finish(x, lam, w, r, A.T @ r)
    if gap <= gap_abs:
        return w, theta, gap, 0, True
    for it in range(1, max_iters + 1):
        grad = -(A.T @ r)
        w = soft_threshold(w - step * grad, lam * step)
        r = x - A @ w
        theta, gap = _finish(x, lam, w, r, A.T @ r)
        if gap <= gap_abs:
            return w, theta, gap, it, True
    return w, theta, gap, max_iters, False


def solve_lasso(problem, warm_start=None, config=None):
    """Solve to a relative duality gap of ``config.gap_tol``.

    Non-convergence within ``max_iters`` returns the best iterate with
    ``converged=False`` rather than raising.
    """
    cfg = config or SolverConfig()
    p = problem.dictionary.p
    x = problem.x
    t0 = time.perf_counter()
    if warm_start is None:
        w0 = np.zeros(p)
    else:
        w0 = np.asarray(warm_start, dtype=np.float64)
        if w0.shape != (p,):
            raise DimensionError(
                f"warm start has shape {w0.shape}, expected ({p},)")
    if p == 0:
        # Nothing to fit: w = 0 is optimal and theta = x / lambda is
        # unconstrained-feasible, so the gap is exactly zero.
        return LassoSolution(
            w=np.empty(0), theta=x / problem.lam, gap=0.0, iterations=0,
            solve_seconds=time.perf_counter() - t0, converged=True)
    A = np.asfortranarray(problem.dictionary.to_array())
    gap_abs = cfg.gap_tol * max(0.5 * float(x @ x), np.finfo(float).tiny)
    solve = _solve_cd if cfg.algorithm == "coordinate_descent" else _solve_ista
    w, theta, gap, iters, ok = solve(A, x, problem.lam, w0, gap_abs,
                                     cfg.max_iters)
    return LassoSolution(w=w, theta=theta, gap=gap, iterations=iters,
                         solve_seconds=time.perf_counter() - t0, converged=ok)
