"""Model fitting: plain, fair, and distributionally robust fair logistic
regression, plus the worst-case objective evaluator for a fixed model.

All three fits share one per-branch objective builder, so the degenerate
configurations (eta = 0, rho = 0) collapse to numerically identical
objectives and therefore identical iterates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    AmbiguityConfig,
    ConfigError,
    Dataset,
    GroundMetric,
    MarginalStats,
    ModelWeights,
    UndefinedUnfairness,
    dual_norm_value,
    sigmoid,
    softplus,
)
from .solver import Constraint, ConvexProblem, LpInstance, minimize_convex, solve_lp

BRANCHES = ((1, 0), (0, 1))

_PENALTY = None  # computed per instance
_NORM_CAP = 1e3  # iterate cap; keeps separable fits finite


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 0.0
    ambiguity: AmbiguityConfig = field(
        default_factory=lambda: AmbiguityConfig(0.0, GroundMetric())
    )
    tol: float = 1e-10
    max_iters: int = 30000

    def __post_init__(self):
        if self.eta < 0:
            raise ConfigError("eta must be non-negative")


@dataclass
class DualVariables:
    lambda0: float = None
    lambda1: float = None
    mu0: np.ndarray = None  # (2, 2) indexed [a, y]
    mu1: np.ndarray = None
    nu0: np.ndarray = None
    nu1: np.ndarray = None
    t: float = None


@dataclass
class FitResult:
    weights: ModelWeights
    objective: float
    duals: DualVariables = None
    iterations: int = 0
    converged: bool = True
    final_tol: float = 0.0


def _check_eta(eta: float, stats: MarginalStats):
    bound = stats.min_positive_share
    if eta > bound + 1e-15:
        raise ConfigError(
            f"eta={eta} exceeds min empirical positive share {bound}"
        )


def _dual_norm_subgrad(beta: np.ndarray, feature_norm: str) -> np.ndarray:
    """Subgradient of the dual feature norm at beta."""
    g = np.zeros_like(beta)
    if feature_norm == "l2":
        nrm = math.sqrt(float(beta @ beta))
        if nrm > 0:
            g = beta / nrm
    elif feature_norm == "l1":  # dual is linf
        if beta.size:
            j = int(np.argmax(np.abs(beta)))
            if beta[j] != 0:
                g[j] = math.copysign(1.0, beta[j])
    else:  # linf ground norm, dual is l1
        g = np.sign(beta)
    return g


def _norm_cap_project(x: np.ndarray) -> np.ndarray:
    nrm = math.sqrt(float(x @ x))
    if nrm > _NORM_CAP:
        return x * (_NORM_CAP / nrm)
    return x


class _BranchTerms:
    """Per-sample coefficients of one epigraph branch (a, a').

    The branch value at beta is
        norm_coef * ||beta||_* + mean_i coef_i * softplus(sign_i * beta.x_i),
    with sign_i = +1 for negative samples and -1 for positives.
    """

    def __init__(self, data: Dataset, stats: MarginalStats, eta: float,
                 a: int, a_prime: int, norm_coef: float, feature_norm: str):
        n = data.n
        coef = np.ones(n)
        if eta != 0.0:
            pos_a = data.cell_mask(a, 1)
            pos_ap = data.cell_mask(a_prime, 1)
            coef[pos_a] = 1.0 - eta * stats.r(a)
            coef[pos_ap] = 1.0 + eta * stats.r(a_prime)
        self.coef = coef
        self.sign = np.where(data.labels == 1, -1.0, 1.0)
        self.X = data.features
        self.norm_coef = norm_coef
        self.feature_norm = feature_norm

    def value_grad(self, beta: np.ndarray):
        t = self.X @ beta
        arg = self.sign * t
        val = float(np.dot(self.coef, softplus(arg))) / len(arg)
        w = self.coef * sigmoid(arg) * self.sign / len(arg)
        grad = self.X.T @ w
        if self.norm_coef != 0.0:
            val += self.norm_coef * dual_norm_value(beta, self.feature_norm)
            grad = grad + self.norm_coef * _dual_norm_subgrad(beta, self.feature_norm)
        return val, grad

    def sample_values(self, beta: np.ndarray) -> np.ndarray:
        return self.coef * softplus(self.sign * (self.X @ beta))


def _minimize_branches(branches, p, cfg: TrainConfig, x0=None):
    def oracle(beta):
        vals_grads = [b.value_grad(beta) for b in branches]
        vals = [vg[0] for vg in vals_grads]
        k = int(np.argmax(vals))  # ties -> lowest branch index
        return vals[k], vals_grads[k][1]

    prob = ConvexProblem(dim=p, oracle=oracle, x0=x0, project=_norm_cap_project)
    x, fval, report = minimize_convex(prob, tol=cfg.tol, max_iters=cfg.max_iters)
    return x, fval, report


def fit_lr(data: Dataset, cfg: TrainConfig = None) -> FitResult:
    """Minimize the empirical mean log-loss."""
    cfg = cfg or TrainConfig()
    stats = MarginalStats.from_dataset(data)
    branch = _BranchTerms(data, stats, 0.0, 1, 0, 0.0,
                          cfg.ambiguity.metric.feature_norm)
    beta, fval, report = _minimize_branches([branch], data.p, cfg)
    return FitResult(ModelWeights(beta), fval, None, report.iterations,
                     report.converged, report.final_tol)


def _fair_branches(data, stats, eta, norm_coefs, feature_norm):
    out = []
    for (a, ap), nc in zip(BRANCHES, norm_coefs):
        out.append(_BranchTerms(data, stats, eta, a, ap, nc, feature_norm))
    return out


def fair_objective(data: Dataset, beta: ModelWeights, eta: float) -> float:
    """max over the two branch expectations; equals mean log-loss plus
    eta times the log-probabilistic unfairness."""
    stats = MarginalStats.from_dataset(data)
    stats.r(0), stats.r(1)  # raise early on an empty positive group
    _check_eta(eta, stats)
    branches = _fair_branches(data, stats, eta, (0.0, 0.0), "l2")
    return max(b.value_grad(beta.beta)[0] for b in branches)


def fit_flr(data: Dataset, cfg: TrainConfig) -> FitResult:
    """Fair logistic regression: epigraph form of the two-branch program."""
    stats = MarginalStats.from_dataset(data)
    stats.r(0), stats.r(1)
    _check_eta(cfg.eta, stats)
    branches = _fair_branches(data, stats, cfg.eta, (0.0, 0.0),
                              cfg.ambiguity.metric.feature_norm)
    beta, fval, report = _minimize_branches(branches, data.p, cfg)
    return FitResult(ModelWeights(beta), fval, None, report.iterations,
                     report.converged, report.final_tol)


# ---------------------------------------------------------------------------
# distributionally robust training


def _branch_norm_coefs(stats: MarginalStats, eta: float, rho: float):
    # lambda feasibility: (1 + eta r_{a'}) ||beta||_* <= lambda_branch
    return tuple(rho * (1.0 + eta * stats.r(ap)) for (_, ap) in BRANCHES)


def _kappa_rows(data: Dataset, metric: GroundMetric, a: int, ap: int):
    """Per-sample lambda coefficients and cell ids of the four dual rows
    for branch (a, a'); rows with an infinite coefficient are dropped."""
    ka, ky = metric.kappa_a, metric.kappa_y
    ahat, yhat = data.sensitive, data.labels
    rows = []  # (lambda coeffs (N,), cell index a*2+y, keep mask)
    specs = [(a, 0), (ap, 0), (a, 1), (ap, 1)]
    for (ar, yr) in specs:
        da = np.abs(ar - ahat).astype(float)
        dy = np.abs(yr - yhat).astype(float)
        coeff = np.zeros(data.n)
        keep = np.ones(data.n, dtype=bool)
        if math.isinf(ka):
            keep &= da == 0
        else:
            coeff += ka * da
        if math.isinf(ky):
            keep &= dy == 0
        else:
            coeff += ky * dy
        rows.append((coeff, 2 * ar + yr, keep))
    return rows


def _branch_s_matrix(data: Dataset, stats: MarginalStats, eta: float,
                     a: int, ap: int, beta: np.ndarray):
    """Row payoffs s_k(i) for the four dual rows of branch (a, a')."""
    t = data.features @ beta
    sp_pos = softplus(t)  # y = 0 destination rows
    sp_neg = softplus(-t)
    S = np.empty((data.n, 4))
    S[:, 0] = sp_pos
    S[:, 1] = sp_pos
    S[:, 2] = (1.0 - eta * stats.r(a)) * sp_neg
    S[:, 3] = (1.0 + eta * stats.r(ap)) * sp_neg
    return S, t


def _branch_s_grad_row(data, stats, eta, a, ap, t, k, idx):
    """Gradient wrt beta of s_k summed over samples idx (already /N scaled
    by the caller)."""
    X = data.features[idx]
    tk = t[idx]
    if k in (0, 1):
        w = sigmoid(tk)
        return X.T @ w
    coef = (1.0 - eta * stats.r(a)) if k == 2 else (1.0 + eta * stats.r(ap))
    w = -coef * sigmoid(-tk)
    return X.T @ w


def worst_case_objective(data: Dataset, beta: ModelWeights, eta: float,
                         ambiguity: AmbiguityConfig) -> float:
    """Worst-case penalized loss over the marginal-constrained ball, for a
    fixed model: the inner dual program solved per branch."""
    stats = MarginalStats.from_dataset(data)
    stats.r(0), stats.r(1)
    _check_eta(eta, stats)
    metric = ambiguity.metric
    rho = ambiguity.rho
    bstar = dual_norm_value(beta.beta, metric.feature_norm)

    if metric.kappas_infinite:
        branches = _fair_branches(data, stats, eta,
                                  _branch_norm_coefs(stats, eta, rho),
                                  metric.feature_norm)
        return max(b.value_grad(beta.beta)[0] for b in branches)

    best = -math.inf
    for (a, ap) in BRANCHES:
        S, _ = _branch_s_matrix(data, stats, eta, a, ap, beta.beta)
        rows = _kappa_rows(data, metric, a, ap)
        lam_lo = (1.0 + eta * stats.r(ap)) * bstar
        # LP variables: lambda, mu[4], nu[N]
        n = data.n
        nv = 5 + n
        obj = np.zeros(nv)
        obj[0] = rho
        obj[1:5] = stats.p_hat.ravel()  # cell index = 2a + y
        obj[5:] = 1.0 / n
        cons = []
        for k, (coeff, cell, keep) in enumerate(rows):
            for i in np.flatnonzero(keep):
                row = np.zeros(nv)
                row[0] = coeff[i]
                row[1 + cell] = 1.0
                row[5 + i] = 1.0
                cons.append(Constraint(row, ">=", float(S[i, k])))
        bounds = [(lam_lo, None)] + [(None, None)] * (4 + n)
        sol = solve_lp(LpInstance(obj, cons, bounds))
        if sol.status != "optimal":  # pragma: no cover
            raise RuntimeError(f"inner dual LP returned {sol.status}")
        best = max(best, float(sol.objective))
    return best


def _drflr_joint_oracle(data, stats, eta, metric, rho, penalty):
    """Objective oracle over v = [beta(p), lambda(2), mu(2x4)] for the
    finite-kappa robust program, with nu eliminated per sample and the
    lambda feasibility cones enforced through an exact penalty."""
    p = data.p
    n = data.n
    p_hat = stats.p_hat.ravel()
    rowdata = [
        _kappa_rows(data, metric, a, ap) for (a, ap) in BRANCHES
    ]
    cone = [(1.0 + eta * stats.r(ap)) for (_, ap) in BRANCHES]

    def unpack(v):
        return v[:p], v[p:p + 2], v[p + 2:].reshape(2, 4)

    def oracle(v):
        beta, lam, mu = unpack(v)
        bstar = dual_norm_value(beta, metric.feature_norm)
        branch_vals = []
        branch_cache = []
        for b, (a, ap) in enumerate(BRANCHES):
            S, t = _branch_s_matrix(data, stats, eta, a, ap, beta)
            M = np.full((n, 4), -np.inf)
            for k, (coeff, cell, keep) in enumerate(rowdata[b]):
                M[keep, k] = S[keep, k] - coeff[keep] * lam[b] - mu[b, cell]
            active = np.argmax(M, axis=1)
            mvals = M[np.arange(n), active]
            val = rho * lam[b] + float(p_hat @ mu[b]) + float(mvals.mean())
            branch_vals.append(val)
            branch_cache.append((S, t, active))
        bsel = int(np.argmax(branch_vals))
        val = branch_vals[bsel]

        g = np.zeros_like(v)
        a, ap = BRANCHES[bsel]
        S, t, active = branch_cache[bsel]
        glam = rho
        gmu = p_hat.copy()
        gbeta = np.zeros(p)
        for k, (coeff, cell, keep) in enumerate(rowdata[bsel]):
            idx = np.flatnonzero(active == k)
            if idx.size == 0:
                continue
            glam -= float(coeff[idx].sum()) / n
            gmu[cell] -= idx.size / n
            gbeta += _branch_s_grad_row(data, stats, eta, a, ap, t, k, idx) / n
        g[:p] = gbeta
        g[p + bsel] = glam
        g[p + 2 + 4 * bsel:p + 2 + 4 * (bsel + 1)] = gmu

        # exact penalty for the dual-norm cones
        for b in range(2):
            viol = cone[b] * bstar - lam[b]
            if viol > 0:
                val += penalty * viol
                g[:p] += penalty * cone[b] * _dual_norm_subgrad(
                    beta, metric.feature_norm)
                g[p + b] -= penalty
        return val, g

    def project(v):
        beta = _norm_cap_project(v[:p])
        out = v.copy()
        out[:p] = beta
        out[p:p + 2] = np.maximum(out[p:p + 2], 0.0)
        return out

    return oracle, project, unpack


def fit_drflr(data: Dataset, cfg: TrainConfig) -> FitResult:
    """Distributionally robust fair logistic regression over the
    marginal-constrained ball; dispatches to the reduced program when both
    kappas are infinite."""
    stats = MarginalStats.from_dataset(data)
    stats.r(0), stats.r(1)
    _check_eta(cfg.eta, stats)
    metric = cfg.ambiguity.metric
    rho = cfg.ambiguity.rho

    if metric.kappas_infinite:
        branches = _fair_branches(data, stats, cfg.eta,
                                  _branch_norm_coefs(stats, cfg.eta, rho),
                                  metric.feature_norm)
        beta, fval, report = _minimize_branches(branches, data.p, cfg)
        duals = _kappa_inf_duals(data, stats, cfg.eta, rho, metric, beta, fval)
        return FitResult(ModelWeights(beta), fval, duals, report.iterations,
                         report.converged, report.final_tol)

    # warm start from the non-robust fair fit
    warm = fit_flr(data, TrainConfig(cfg.eta, AmbiguityConfig(0.0, metric),
                                     cfg.tol, cfg.max_iters))
    kf = [metric.kappa_a, metric.kappa_y]
    kappa_scale = sum(k for k in kf if math.isfinite(k))
    penalty = 10.0 * (1.0 + rho + 2.0 * kappa_scale)
    oracle, project, unpack = _drflr_joint_oracle(
        data, stats, cfg.eta, metric, rho, penalty)

    p = data.p
    v0 = np.zeros(p + 10)
    v0[:p] = warm.weights.beta
    bstar0 = dual_norm_value(v0[:p], metric.feature_norm)
    lam_init = bstar0 * (1.0 + cfg.eta * max(stats.r(0), stats.r(1))) + rho
    v0[p:p + 2] = lam_init
    prob = ConvexProblem(dim=p + 10, oracle=oracle, x0=v0, project=project)
    v, fval, report = minimize_convex(prob, tol=cfg.tol,
                                      max_iters=cfg.max_iters)
    beta, lam, mu = unpack(v)
    # feasibility restoration before reporting duals
    bstar = dual_norm_value(beta, metric.feature_norm)
    for b, (_, ap) in enumerate(BRANCHES):
        lam[b] = max(lam[b], (1.0 + cfg.eta * stats.r(ap)) * bstar)
    fval, _ = oracle(v)
    duals = _finite_kappa_duals(data, stats, cfg.eta, metric, beta, lam, mu,
                                fval)
    return FitResult(ModelWeights(beta), fval, duals, report.iterations,
                     report.converged, report.final_tol)


def _kappa_inf_duals(data, stats, eta, rho, metric, beta, fval):
    bstar = dual_norm_value(beta, metric.feature_norm)
    duals = DualVariables(t=fval)
    nus = []
    lams = []
    for (a, ap) in BRANCHES:
        terms = _BranchTerms(data, stats, eta, a, ap, 0.0, metric.feature_norm)
        nus.append(terms.sample_values(beta))
        lams.append((1.0 + eta * stats.r(ap)) * bstar)
    duals.lambda1, duals.lambda0 = lams  # branch (1,0) carries lambda_1
    duals.nu1, duals.nu0 = nus
    return duals


def _finite_kappa_duals(data, stats, eta, metric, beta, lam, mu, fval):
    duals = DualVariables(t=fval)
    nus = []
    for b, (a, ap) in enumerate(BRANCHES):
        S, _ = _branch_s_matrix(data, stats, eta, a, ap, beta)
        M = np.full((data.n, 4), -np.inf)
        for k, (coeff, cell, keep) in enumerate(_kappa_rows(data, metric, a, ap)):
            M[keep, k] = S[keep, k] - coeff[keep] * lam[b] - mu[b, cell]
        nus.append(M.max(axis=1))
    duals.lambda1, duals.lambda0 = float(lam[0]), float(lam[1])
    duals.mu1, duals.mu0 = mu[0].reshape(2, 2), mu[1].reshape(2, 2)
    duals.nu1, duals.nu0 = nus
    return duals


# ---------------------------------------------------------------------------
# gradient helpers (exposed for verification)


def log_loss_gradient(beta: ModelWeights, x: np.ndarray, y: int) -> np.ndarray:
    """d/dbeta of the log-loss at a single sample."""
    x = np.asarray(x, dtype=float)
    t = float(x @ beta.beta)
    h = float(sigmoid(np.array([t]))[0])
    return (h - y) * x


def log_h_gradient(beta: ModelWeights, x: np.ndarray) -> np.ndarray:
    """d/dbeta of log h_beta(x)."""
    x = np.asarray(x, dtype=float)
    t = float(x @ beta.beta)
    h = float(sigmoid(np.array([t]))[0])
    return (1.0 - h) * x


def drflr_objective_oracle(data: Dataset, cfg: TrainConfig):
    """(value, gradient) oracle of the nu-eliminated robust objective over
    the joint variable [beta, lambda, mu]; exposed for derivative checks."""
    stats = MarginalStats.from_dataset(data)
    _check_eta(cfg.eta, stats)
    oracle, project, unpack = _drflr_joint_oracle(
        data, stats, cfg.eta, cfg.ambiguity.metric, cfg.ambiguity.rho, 0.0)
    return oracle
