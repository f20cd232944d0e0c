"""Dense two-phase simplex with dual extraction.

Minimizes c.x subject to general-relation constraints and box bounds.
Entering rule is Dantzig for a warm phase, then Bland for anti-cycling;
ties in the ratio test break toward the smallest basis index, so the
solver is fully deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_ENTER_TOL = 1e-9
_PIVOT_TOL = 1e-10
_FEAS_TOL = 1e-7


@dataclass(frozen=True)
class Constraint:
    coeffs: np.ndarray
    rel: str  # "<=", "=", ">="
    rhs: float

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if self.rel not in ("<=", "=", ">="):
            raise ValueError(f"unknown relation {self.rel!r}")
        if not np.all(np.isfinite(c)) or not math.isfinite(self.rhs):
            raise ValueError("constraint coefficients must be finite")
        object.__setattr__(self, "coeffs", c)


@dataclass(frozen=True)
class LpInstance:
    """min objective . x  s.t.  constraints, bounds (None = unbounded side)."""

    objective: np.ndarray
    constraints: list
    bounds: list = None  # per-variable (lo, hi); default all free

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        if not np.all(np.isfinite(c)):
            raise ValueError("objective must be finite")
        object.__setattr__(self, "objective", c)
        bounds = self.bounds
        if bounds is None:
            bounds = [(None, None)] * c.shape[0]
        if len(bounds) != c.shape[0]:
            raise ValueError("bounds length must match objective")
        for con in self.constraints:
            if con.coeffs.shape != c.shape:
                raise ValueError("constraint dimension mismatch")
        object.__setattr__(self, "bounds", list(bounds))

    @property
    def n(self) -> int:
        return self.objective.shape[0]


@dataclass
class LpSolution:
    status: str  # "optimal", "infeasible", "unbounded"
    x: np.ndarray = None
    duals: np.ndarray = None  # one multiplier per original constraint
    objective: float = math.nan
    gap: float = math.nan
    iterations: int = 0


def _is_neg_inf(v):
    return v is None or v == -math.inf


def _is_pos_inf(v):
    return v is None or v == math.inf


class _Simplex:
    """Phase-1/phase-2 tableau on the equality standard form A u = b, u >= 0."""

    def __init__(self, A, b, c):
        self.m, n = A.shape
        self.n_struct = n
        # append one artificial per row; their columns track B^{-1}
        self.T = np.hstack([A, np.eye(self.m), b[:, None]])
        self.c = c
        self.basis = list(range(n, n + self.m))
        self.iterations = 0

    def _reduced_costs(self, cost):
        cb = cost[self.basis]
        return cost - cb @ self.T[:, :-1]

    def _pivot(self, row, col):
        T = self.T
        T[row] /= T[row, col]
        factors = T[:, col].copy()
        factors[row] = 0.0
        T -= factors[:, None] * T[row][None, :]
        self.basis[row] = col
        self.iterations += 1

    def _run(self, cost, allowed, max_iters):
        warm = 2 * (self.m + self.n_struct)
        for it in range(max_iters):
            r = self._reduced_costs(cost)
            candidates = np.flatnonzero(allowed & (r < -_ENTER_TOL))
            if candidates.size == 0:
                return "optimal"
            if it < warm:
                col = int(candidates[np.argmin(r[candidates])])
            else:  # Bland
                col = int(candidates[0])
            colvals = self.T[:, col]
            rows = np.flatnonzero(colvals > _PIVOT_TOL)
            if rows.size == 0:
                return "unbounded"
            ratios = self.T[rows, -1] / colvals[rows]
            best = ratios.min()
            tied = rows[ratios <= best + 1e-12]
            row = int(min(tied, key=lambda i: self.basis[i]))
            self._pivot(row, col)
        raise RuntimeError("simplex iteration limit exceeded")

    def solve(self, max_iters):
        ncols = self.n_struct + self.m
        # phase 1: minimize the sum of artificials
        cost1 = np.zeros(ncols)
        cost1[self.n_struct:] = 1.0
        allowed = np.ones(ncols, dtype=bool)
        status = self._run(cost1, allowed, max_iters)
        if status != "optimal":  # pragma: no cover - phase 1 is always bounded
            return status
        scale = max(1.0, float(np.abs(self.T[:, -1]).max()))
        if float(cost1[self.basis] @ self.T[:, -1]) > _FEAS_TOL * scale:
            return "infeasible"
        # drive basic artificials out where a structural pivot exists
        for row in range(self.m):
            if self.basis[row] >= self.n_struct:
                cols = np.flatnonzero(np.abs(self.T[row, : self.n_struct]) > _PIVOT_TOL)
                if cols.size:
                    self._pivot(row, int(cols[0]))
        # phase 2
        cost2 = np.zeros(ncols)
        cost2[: self.n_struct] = self.c
        allowed = np.ones(ncols, dtype=bool)
        allowed[self.n_struct:] = False
        return self._run(cost2, allowed, max_iters)

    @property
    def solution(self):
        u = np.zeros(self.n_struct)
        for row, j in enumerate(self.basis):
            if j < self.n_struct:
                u[j] = self.T[row, -1]
        return u

    @property
    def duals(self):
        cost = np.zeros(self.n_struct + self.m)
        cost[: self.n_struct] = self.c
        # reduced cost of artificial i is -y_i
        return -self._reduced_costs(cost)[self.n_struct:]


def solve_lp(inst: LpInstance, max_iters: int = None) -> LpSolution:
    """Solve the instance; optimal solutions carry duals and a duality gap."""
    n = inst.n
    m0 = len(inst.constraints)

    # shift/split variables so every standard-form variable is >= 0
    col_of = []  # per original var: ("shift", col, lo) | ("neg", col, hi) | ("split", c+, c-)
    extra_rows = []  # upper-bound rows (coeff column, rhs)
    ncols = 0
    for j, (lo, hi) in enumerate(inst.bounds):
        lo_inf, hi_inf = _is_neg_inf(lo), _is_pos_inf(hi)
        if not lo_inf:
            col_of.append(("shift", ncols, float(lo)))
            if not hi_inf:
                extra_rows.append((ncols, float(hi) - float(lo)))
            ncols += 1
        elif not hi_inf:
            col_of.append(("neg", ncols, float(hi)))
            ncols += 1
        else:
            col_of.append(("split", ncols, ncols + 1))
            ncols += 2

    def expand(coeffs):
        row = np.zeros(ncols)
        shift = 0.0
        for j, spec in enumerate(col_of):
            v = coeffs[j]
            if v == 0.0:
                continue
            if spec[0] == "shift":
                row[spec[1]] += v
                shift += v * spec[2]
            elif spec[0] == "neg":
                row[spec[1]] -= v
                shift += v * spec[2]
            else:
                row[spec[1]] += v
                row[spec[2]] -= v
        return row, shift

    rows, rhs, row_scale_sign = [], [], []
    nslack = sum(1 for con in inst.constraints if con.rel != "=") + len(extra_rows)
    slack_at = ncols
    total = ncols + nslack
    k = 0
    for con in inst.constraints:
        row, shift = expand(con.coeffs)
        b = con.rhs - shift
        full = np.zeros(total)
        full[:ncols] = row
        if con.rel == "<=":
            full[slack_at + k] = 1.0
            k += 1
        elif con.rel == ">=":
            full[slack_at + k] = -1.0
            k += 1
        # row equilibration keeps huge coefficients (e.g. large kappas) tame
        scale = max(1.0, float(np.abs(full).max()))
        sign = 1.0 if b >= 0 else -1.0
        rows.append(sign * full / scale)
        rhs.append(sign * b / scale)
        row_scale_sign.append(sign / scale)
    for colj, ub in extra_rows:
        full = np.zeros(total)
        full[colj] = 1.0
        full[slack_at + k] = 1.0
        k += 1
        rows.append(full)
        rhs.append(ub)
        row_scale_sign.append(1.0)

    cstd = np.zeros(total)
    obj_shift = 0.0
    crow, cshift = expand(inst.objective)
    cstd[:ncols] = crow
    obj_shift = cshift

    if not rows:
        # bounds-only problem: standard-form variables are free to grow
        if np.any(cstd < -_ENTER_TOL):
            return LpSolution(status="unbounded")
        u = np.zeros(total)
        x = np.empty(n)
        for j, spec in enumerate(col_of):
            if spec[0] == "shift":
                x[j] = spec[2]
            elif spec[0] == "neg":
                x[j] = spec[2]
            else:
                x[j] = 0.0
        return LpSolution(status="optimal", x=x, duals=np.zeros(m0),
                          objective=float(inst.objective @ x), gap=0.0)

    A = np.array(rows)
    b = np.array(rhs)
    sim = _Simplex(A, b, cstd)
    if max_iters is None:
        max_iters = 200 * (A.shape[0] + total) + 2000
    status = sim.solve(max_iters)
    if status != "optimal":
        return LpSolution(status=status, iterations=sim.iterations)

    u = sim.solution
    x = np.empty(n)
    for j, spec in enumerate(col_of):
        if spec[0] == "shift":
            x[j] = spec[2] + u[spec[1]]
        elif spec[0] == "neg":
            x[j] = spec[2] - u[spec[1]]
        else:
            x[j] = u[spec[1]] - u[spec[2]]
    obj = float(inst.objective @ x)

    y = sim.duals
    gap = abs(float(cstd @ u) - float(y @ b))
    duals = np.array([y[i] * row_scale_sign[i] for i in range(m0)])
    return LpSolution(
        status="optimal", x=x, duals=duals, objective=obj, gap=gap,
        iterations=sim.iterations,
    )
