"""Projected subgradient minimizer for nonsmooth convex objectives.

Uses Polyak-type steps against an adaptive target level: the target sits a
gap delta below the incumbent, and delta halves whenever a stretch of
iterations fails to beat the incumbent. With a known lower bound the
classical Polyak step is used directly. Deterministic for fixed inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class ConvexProblem:
    dim: int
    oracle: callable  # x -> (value, subgradient)
    x0: np.ndarray = None
    project: callable = None  # x -> closest feasible x (identity if None)
    lower_bound: float = None  # enables exact Polyak steps

    def __post_init__(self):
        if self.x0 is None:
            self.x0 = np.zeros(self.dim)
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.x0.shape != (self.dim,):
            raise ValueError("x0 dimension mismatch")


@dataclass
class ConvergenceReport:
    iterations: int
    converged: bool
    final_tol: float
    final_step: float


_STALL_WINDOW = 60
_GRAD_TOL = 1e-12


def minimize_convex(prob: ConvexProblem, tol: float = 1e-8, max_iters: int = 20000):
    """Return (point, value, report); value is within ~tol*(1+|value|) of the
    best achievable along the iterate path. Non-convergence returns the best
    iterate with converged=False rather than raising."""
    project = prob.project if prob.project is not None else (lambda v: v)
    x = project(prob.x0.copy())
    f, g = prob.oracle(x)
    f_best, x_best = f, x.copy()

    delta = max(abs(f_best), 1.0) * 0.1
    since_improve = 0
    step = 0.0
    it = 0
    for it in range(1, max_iters + 1):
        gnorm2 = float(g @ g)
        if gnorm2 <= _GRAD_TOL**2:
            return x_best, f_best, ConvergenceReport(it, True, 0.0, step)
        if prob.lower_bound is not None:
            target = prob.lower_bound
            gap = f - target
            if gap <= tol * (1.0 + abs(f)):
                return x_best, f_best, ConvergenceReport(it, True, gap, step)
        else:
            target = f_best - delta
        step = max(f - target, 0.0) / gnorm2
        if step == 0.0:
            step = delta / gnorm2
        x = project(x - step * g)
        f, g = prob.oracle(x)
        if f < f_best - 1e-14 * (1.0 + abs(f_best)):
            improved_by = f_best - f
            f_best, x_best = f, x.copy()
            since_improve = 0
            if improved_by < 0.1 * delta:
                delta = max(delta * 0.5, 0.0)
        else:
            since_improve += 1
            if since_improve >= _STALL_WINDOW:
                delta *= 0.5
                x = x_best.copy()
                f, g = prob.oracle(x)
                since_improve = 0
        if prob.lower_bound is None and delta <= tol * (1.0 + abs(f_best)):
            return x_best, f_best, ConvergenceReport(it, True, delta, step)
    final = delta if prob.lower_bound is None else f - prob.lower_bound
    return x_best, f_best, ConvergenceReport(it, False, final, step)
