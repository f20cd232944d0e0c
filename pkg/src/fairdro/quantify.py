"""Auditing a fixed classifier: worst- and best-case deterministic
unfairness over the marginal-constrained Wasserstein ball.

The signed quantity V(a, a') is the largest achievable value of
P[X in X1 | A=a, Y=1] - P[X in X1 | A=a', Y=1] over the ball. It is
computed through a dual linear program in general and through a continuous
knapsack when attribute and label perturbations are forbidden. The audit
interval is [max(0, -V(1,0), -V(0,1)), max(V(1,0), V(0,1))].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    INF,
    AmbiguityConfig,
    ConfigError,
    ContractViolation,
    Dataset,
    GroundMetric,
    MarginalStats,
    ModelWeights,
    UndefinedUnfairness,
    dual_norm_value,
    norm_value,
)
from .solver import Constraint, KnapsackInstance, LpInstance, greedy_knapsack, solve_lp


def _logit(tau: float) -> float:
    if not (0.0 < tau < 1.0):
        raise ConfigError("threshold tau must lie strictly inside (0, 1)")
    return math.log(tau / (1.0 - tau))


@dataclass
class ClassifierRegions:
    """Acceptance region X1 = {x : score(x) >= tau} with distance and
    projection oracles to either side of the decision boundary.

    `distance(X, cls)` returns, per row of X, the ground-norm distance to the
    class-`cls` region (0 when the point already lies in its closure).
    `projection(x)` returns a closest boundary point.
    """

    score: callable
    tau: float
    distance: callable
    projection: callable
    feature_norm: str = "l2"

    def in_x1(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(self.score(X)) >= self.tau

    @classmethod
    def linear(cls, beta: ModelWeights, tau: float = 0.5,
               feature_norm: str = "l2") -> "ClassifierRegions":
        """Closed-form oracles for the logistic score 1/(1+exp(-beta.x))."""
        b0 = _logit(tau)
        w = beta.beta
        bstar = dual_norm_value(w, feature_norm)

        def score(X):
            t = np.asarray(X, dtype=float) @ w
            return 1.0 / (1.0 + np.exp(-np.clip(t, -500, 500)))

        def distance(X, target_class):
            t = np.asarray(X, dtype=float) @ w
            if target_class == 1:
                gap = np.maximum(0.0, b0 - t)
            else:
                gap = np.maximum(0.0, t - b0)
            if bstar == 0.0:
                return np.where(gap > 0, INF, 0.0)
            return gap / bstar

        def projection(x):
            x = np.asarray(x, dtype=float)
            if bstar == 0.0:
                raise ContractViolation(
                    "constant classifier has no decision boundary")
            t = float(x @ w)
            if feature_norm == "l2":
                return x + (b0 - t) / float(w @ w) * w
            if feature_norm == "l1":
                j = int(np.argmax(np.abs(w)))
                out = x.copy()
                out[j] += (b0 - t) / w[j]
                return out
            # linf ground norm: spread the move across every active weight
            out = x.copy()
            s = np.sign(w)
            out += s * (b0 - t) / norm_value(w, "l1")
            return out

        return cls(score, tau, distance, projection, feature_norm)

    @classmethod
    def plugin(cls, score, tau: float, reference: Dataset,
               feature_norm: str = "l2", bisect_iters: int = 60) -> "ClassifierRegions":
        """Heuristic oracles for a black-box score: distances are estimated
        by bisecting along the segment toward the nearest reference point on
        the opposite side of the boundary."""
        _logit(tau)  # validate tau

        def in_x1(X):
            return np.asarray(score(np.atleast_2d(X))) >= tau

        def _to_boundary(x):
            x = np.asarray(x, dtype=float)
            inside = bool(in_x1(x[None, :])[0])
            ref_mask = in_x1(reference.features) != inside
            if not ref_mask.any():
                return None
            cands = reference.features[ref_mask]
            dists = [norm_value(c - x, feature_norm) for c in cands]
            far = cands[int(np.argmin(dists))]
            lo, hi = x, far
            for _ in range(bisect_iters):
                mid = 0.5 * (lo + hi)
                if bool(in_x1(mid[None, :])[0]) == inside:
                    lo = mid
                else:
                    hi = mid
            return hi

        def distance(X, target_class):
            X = np.atleast_2d(np.asarray(X, dtype=float))
            member = in_x1(X)
            out = np.zeros(X.shape[0])
            for i, x in enumerate(X):
                if (member[i] and target_class == 1) or \
                        (not member[i] and target_class == 0):
                    continue
                bp = _to_boundary(x)
                out[i] = INF if bp is None else norm_value(bp - x, feature_norm)
            return out

        def projection(x):
            bp = _to_boundary(x)
            if bp is None:
                raise ContractViolation("no opposite-class reference point")
            return bp

        return cls(score, tau, distance, projection, feature_norm)


@dataclass
class AuditInstance:
    """A test set, a classifier's regions, and a ball radius, with the
    per-sample boundary distances precomputed."""

    data: Dataset
    regions: ClassifierRegions
    ambiguity: AmbiguityConfig
    stats: MarginalStats = None
    d1: np.ndarray = None  # distance into X1
    d0: np.ndarray = None  # distance into X0

    def __post_init__(self):
        if self.stats is None:
            self.stats = MarginalStats.from_dataset(self.data)
        self.stats.r(0), self.stats.r(1)  # both positive cells required
        if self.d1 is None:
            self.d1 = np.asarray(self.regions.distance(self.data.features, 1),
                                 dtype=float)
        if self.d0 is None:
            self.d0 = np.asarray(self.regions.distance(self.data.features, 0),
                                 dtype=float)

    @property
    def membership(self) -> np.ndarray:
        return self.regions.in_x1(self.data.features)

    @property
    def boundary_indices(self) -> np.ndarray:
        return np.flatnonzero((self.d1 == 0.0) & (self.d0 == 0.0))

    def empirical_v(self, a: int, a_prime: int) -> float:
        member = self.membership
        out = {}
        for g in (a, a_prime):
            mask = self.data.cell_mask(g, 1)
            out[g] = float(np.mean(member[mask]))
        return out[a] - out[a_prime]


@dataclass
class UnfairnessInterval:
    lower: float
    upper: float
    v10: float
    v01: float
    extremal: "ExtremalDistribution" = None


@dataclass
class ExtremalDistribution:
    """Feasible witness distribution assembled from a knapsack solution:
    moved mass sits on boundary projections, the rest stays put."""

    support: list  # of (feature vector, a, y)
    weights: np.ndarray
    z_star: np.ndarray
    moved_indices: np.ndarray
    objective_value: float = math.nan
    boundary_gap: float = 0.0


def _check_pair(a, a_prime):
    if a == a_prime or a not in (0, 1) or a_prime not in (0, 1):
        raise ContractViolation("group pair must be (1,0) or (0,1)")


def _v_rows(inst: AuditInstance, a: int, ap: int):
    """(lambda coefficient, mu cell, rhs, keep mask) per dual row."""
    metric = inst.ambiguity.metric
    ka, ky = metric.kappa_a, metric.kappa_y
    ahat = inst.data.sensitive.astype(float)
    yhat = inst.data.labels.astype(float)
    n = inst.data.n
    ra = inst.stats.r(a)
    rap = inst.stats.r(ap)

    def base(ar, yr):
        da = np.abs(ar - ahat)
        dy = np.abs(yr - yhat)
        coeff = np.zeros(n)
        keep = np.ones(n, dtype=bool)
        for kap, diff in ((ka, da), (ky, dy)):
            if math.isinf(kap):
                keep &= diff == 0
            else:
                coeff += kap * diff
        return coeff, keep

    rows = []
    c, k = base(a, 0)
    rows.append((c, 2 * a + 0, np.zeros(n), k))
    c, k = base(ap, 0)
    rows.append((c, 2 * ap + 0, np.zeros(n), k))
    c, k = base(a, 1)
    rows.append((c, 2 * a + 1, np.zeros(n), k))
    rows.append((c + np.where(np.isfinite(inst.d1), inst.d1, 0.0),
                 2 * a + 1, np.full(n, ra), k & np.isfinite(inst.d1)))
    c, k = base(ap, 1)
    rows.append((c + np.where(np.isfinite(inst.d0), inst.d0, 0.0),
                 2 * ap + 1, np.zeros(n), k & np.isfinite(inst.d0)))
    rows.append((c, 2 * ap + 1, np.full(n, -rap), k))
    return rows


def compute_v(inst: AuditInstance, a: int, a_prime: int) -> float:
    """Largest achievable signed acceptance gap between the positives of
    group a and group a', over the ball; dual LP with six rows per sample."""
    _check_pair(a, a_prime)
    rho = inst.ambiguity.rho
    if rho == 0.0:
        return inst.empirical_v(a, a_prime)

    n = inst.data.n
    nv = 5 + n  # lambda, mu[4], nu[N]
    obj = np.zeros(nv)
    obj[0] = rho
    obj[1:5] = inst.stats.p_hat.ravel()
    obj[5:] = 1.0 / n
    rows = []  # (coeff, cell, rhs, i)
    for coeff, cell, rhs, keep in _v_rows(inst, a, a_prime):
        for i in np.flatnonzero(keep):
            rows.append((float(coeff[i]), cell, float(rhs[i]), int(i)))

    # Constraints with enormous lambda coefficients (large but finite kappas)
    # wreck the simplex conditioning, yet they are slack unless lambda ends
    # up tiny. Start from the well-scaled rows, always keeping enough to pin
    # every nu_i and every referenced mu cell, then pull in violated rows.
    dists = np.concatenate([inst.d1[np.isfinite(inst.d1)],
                            inst.d0[np.isfinite(inst.d0)]])
    rhs_scale = max(inst.stats.r(a), inst.stats.r(a_prime))
    thresh = 1e5 * max(1.0, float(dists.max()) if dists.size else 1.0,
                       rhs_scale)
    active = set(k for k, r in enumerate(rows) if r[0] <= thresh)
    best_for_i = {}
    best_for_cell = {}
    for k, (cf, cell, _, i) in enumerate(rows):
        if i not in best_for_i or cf < rows[best_for_i[i]][0]:
            best_for_i[i] = k
        if cell not in best_for_cell or cf < rows[best_for_cell[cell]][0]:
            best_for_cell[cell] = k
    active |= set(best_for_i.values()) | set(best_for_cell.values())

    bounds = [(0.0, None)] + [(None, None)] * (4 + n)
    for _ in range(30):
        cons = []
        for k in sorted(active):
            cf, cell, rhs, i = rows[k]
            row = np.zeros(nv)
            row[0] = cf
            row[1 + cell] = 1.0
            row[5 + i] = 1.0
            cons.append(Constraint(row, ">=", rhs))
        sol = solve_lp(LpInstance(obj, cons, bounds))
        if sol.status != "optimal":  # pragma: no cover
            raise RuntimeError(f"audit LP returned {sol.status}")
        x = sol.x
        violated = [
            k for k, (cf, cell, rhs, i) in enumerate(rows)
            if k not in active
            and x[5 + i] + cf * x[0] + x[1 + cell] < rhs - 1e-9 * (1.0 + abs(rhs))
        ]
        if not violated:
            return float(sol.objective)
        active |= set(violated)
    raise RuntimeError("audit LP row generation failed to converge")


def _knapsack_items(inst: AuditInstance, a: int, ap: int):
    """Per-sample (reward, weight) of the fixed-marginal knapsack; samples
    that are immovable or irrelevant carry (0, inf)."""
    n = inst.data.n
    c = np.zeros(n)
    w = np.full(n, INF)
    interior_x0 = inst.d1 > 0.0  # strictly outside X1
    interior_x1 = inst.d0 > 0.0
    move_in = inst.data.cell_mask(a, 1) & interior_x0
    move_out = inst.data.cell_mask(ap, 1) & interior_x1
    c[move_in] = inst.stats.r(a)
    w[move_in] = inst.d1[move_in]
    c[move_out] = inst.stats.r(ap)
    w[move_out] = inst.d0[move_out]
    return c, w, move_out


def compute_v_knapsack(inst: AuditInstance, a: int, a_prime: int):
    """Knapsack form of V(a, a') when attribute and label transport is
    forbidden; returns (value, z_star)."""
    _check_pair(a, a_prime)
    if not inst.ambiguity.metric.kappas_infinite:
        raise ContractViolation(
            "knapsack path requires infinite kappas; use compute_v")
    n = inst.data.n
    v_hat = inst.empirical_v(a, a_prime)
    rho = inst.ambiguity.rho
    if rho == 0.0:
        return v_hat, np.zeros(n)
    c, w, _ = _knapsack_items(inst, a, a_prime)
    z, gain = greedy_knapsack(KnapsackInstance(c, w, n * rho))
    return v_hat + gain / n, z


def _branch_value(inst: AuditInstance, a: int, ap: int) -> float:
    if inst.ambiguity.metric.kappas_infinite:
        return compute_v_knapsack(inst, a, ap)[0]
    return compute_v(inst, a, ap)


def unfairness_interval(inst: AuditInstance,
                        with_extremal: bool = False) -> UnfairnessInterval:
    """[lowest, highest] deterministic unfairness attainable over the ball."""
    v10 = _branch_value(inst, 1, 0)
    v01 = _branch_value(inst, 0, 1)
    upper = max(v10, v01)
    lower = max(0.0, -v10, -v01)
    extremal = None
    if with_extremal and inst.ambiguity.metric.kappas_infinite:
        a, ap = (1, 0) if v10 >= v01 else (0, 1)
        extremal = extremal_distribution(inst, a, ap)
    return UnfairnessInterval(lower, upper, v10, v01, extremal)


def extremal_distribution(inst: AuditInstance, a: int,
                          a_prime: int) -> ExtremalDistribution:
    """Witness distribution for V(a, a'): each moved sample splits its mass
    between its boundary projection and its original location. Because the
    boundary belongs to the closed acceptance region, mass moved out of X1
    lands back inside it, so the witness undershoots V(a, a') by exactly
    the reported boundary gap."""
    _check_pair(a, a_prime)
    if not inst.ambiguity.metric.kappas_infinite:
        raise ContractViolation("extremal construction requires infinite kappas")
    value, z = compute_v_knapsack(inst, a, a_prime)
    _, _, move_out = _knapsack_items(inst, a, a_prime)
    n = inst.data.n
    support, weights, on_boundary = [], [], []
    for i in range(n):
        xi = inst.data.features[i]
        ai, yi = int(inst.data.sensitive[i]), int(inst.data.labels[i])
        if z[i] > 0.0:
            support.append((inst.regions.projection(xi), ai, yi))
            weights.append(z[i] / n)
            on_boundary.append(True)
        if z[i] < 1.0:
            support.append((xi, ai, yi))
            weights.append((1.0 - z[i]) / n)
            on_boundary.append(False)
    gap = float(inst.stats.r(a_prime) * z[move_out].sum()) / n

    # projected points sit exactly on the boundary, which belongs to the
    # closed acceptance region; checking the score there is fragile
    member = np.array([flag or bool(inst.regions.in_x1(
        np.asarray(x)[None, :])[0])
        for (x, _, _), flag in zip(support, on_boundary)])
    obj = 0.0
    for k, (x, ai, yi) in enumerate(support):
        if yi != 1 or not member[k]:
            continue
        if ai == a:
            obj += inst.stats.r(a) * weights[k]
        elif ai == a_prime:
            obj -= inst.stats.r(a_prime) * weights[k]
    return ExtremalDistribution(
        support=support,
        weights=np.asarray(weights),
        z_star=z,
        moved_indices=np.flatnonzero(z > 0.0),
        objective_value=float(obj),
        boundary_gap=gap,
    )


def fairness_distance(data: Dataset, regions: ClassifierRegions,
                      metric: GroundMetric, tolerance: float = 1e-6) -> float:
    """Smallest ball radius at which the best-case unfairness reaches zero.

    Both V(1,0) and V(0,1) are nondecreasing in rho, so the condition
    min(V(1,0), V(0,1)) >= 0 is monotone and bisection applies.
    """

    def fair_at(rho):
        inst = AuditInstance(data, regions, AmbiguityConfig(rho, metric))
        return min(_branch_value(inst, 1, 0),
                   _branch_value(inst, 0, 1)) >= -1e-12

    if fair_at(0.0):
        return 0.0

    inst0 = AuditInstance(data, regions, AmbiguityConfig(0.0, metric))
    finite = np.concatenate([inst0.d1[np.isfinite(inst0.d1)],
                             inst0.d0[np.isfinite(inst0.d0)]])
    hi = float(finite.sum()) / data.n if finite.size else 1.0
    hi = max(hi, tolerance)
    for _ in range(60):
        if fair_at(hi):
            break
        hi *= 2.0
    else:
        return INF
    lo = 0.0
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if fair_at(mid):
            hi = mid
        else:
            lo = mid
    return hi


def audit_report(inst: AuditInstance, rho_hat: float = None,
                 with_extremal: bool = True) -> dict:
    """JSON-ready summary of one audit run."""
    interval = unfairness_interval(inst, with_extremal=with_extremal)
    metric = inst.ambiguity.metric

    def _num(v):
        return "inf" if math.isinf(v) else float(v)

    moved = []
    if interval.extremal is not None:
        for i in interval.extremal.moved_indices:
            dist = inst.d1[i] if inst.d1[i] > 0 else inst.d0[i]
            moved.append({"index": int(i),
                          "z": float(interval.extremal.z_star[i]),
                          "distance": float(dist)})
    return {
        "rho": float(inst.ambiguity.rho),
        "kappa_A": _num(metric.kappa_a),
        "kappa_Y": _num(metric.kappa_y),
        "tau": float(inst.regions.tau),
        "v10": float(interval.v10),
        "v01": float(interval.v01),
        "lower": float(interval.lower),
        "upper": float(interval.upper),
        "rho_hat": None if rho_hat is None else _num(rho_hat),
        "moved": moved,
        "boundary_indices": [int(i) for i in inst.boundary_indices],
    }
