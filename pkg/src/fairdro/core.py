"""Data model and elementary operations shared by every other module.

Holds the dataset container, empirical marginal statistics, the transport
ground metric, the logistic hypothesis and its log-loss, the three
group-unfairness measures, and an exact optimal-transport distance for
finitely supported distributions.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

INF = float("inf")


class ContractViolation(ValueError):
    """An operation was called with arguments that break its preconditions."""


class UndefinedUnfairness(RuntimeError):
    """A conditional expectation over an empty group was requested."""


class ConfigError(ValueError):
    """A configuration value violates a documented bound."""


# ---------------------------------------------------------------------------
# norms


def norm_value(x: np.ndarray, which: str) -> float:
    if which == "l1":
        return float(np.sum(np.abs(x)))
    if which == "l2":
        return float(np.sqrt(np.dot(x, x)))
    if which == "linf":
        return float(np.max(np.abs(x))) if x.size else 0.0
    raise ContractViolation(f"unknown norm {which!r}")


DUAL_NORM = {"l1": "linf", "l2": "l2", "linf": "l1"}


def dual_norm_value(x: np.ndarray, which: str) -> float:
    """Value of the norm dual to `which` (l1<->linf, l2 self-dual)."""
    return norm_value(x, DUAL_NORM[which])


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class Dataset:
    """N samples of (feature vector, binary sensitive attribute, binary label)."""

    features: np.ndarray  # (N, p) float
    sensitive: np.ndarray  # (N,) int in {0, 1}
    labels: np.ndarray  # (N,) int in {0, 1}

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        a = np.asarray(self.sensitive, dtype=int)
        y = np.asarray(self.labels, dtype=int)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ContractViolation("features must be a non-empty N x p matrix")
        if a.shape != (X.shape[0],) or y.shape != (X.shape[0],):
            raise ContractViolation("sensitive/labels must have length N")
        if not np.all(np.isfinite(X)):
            raise ContractViolation("features contain non-finite entries")
        if not np.all((a == 0) | (a == 1)) or not np.all((y == 0) | (y == 1)):
            raise ContractViolation("sensitive and labels must be 0/1")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "sensitive", a)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def cell_mask(self, a: int, y: int) -> np.ndarray:
        return (self.sensitive == a) & (self.labels == y)

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.features[idx], self.sensitive[idx], self.labels[idx])


@dataclass(frozen=True)
class MarginalStats:
    """Empirical cell proportions p_hat[a, y] and inverse positives r[a].

    Built from integer counts so the proportions sum to one exactly.
    """

    counts: np.ndarray  # (2, 2) int, indexed [a, y]
    n: int

    @classmethod
    def from_dataset(cls, data: Dataset) -> "MarginalStats":
        counts = np.zeros((2, 2), dtype=int)
        for a in (0, 1):
            for y in (0, 1):
                counts[a, y] = int(np.sum(data.cell_mask(a, y)))
        return cls(counts=counts, n=data.n)

    @property
    def p_hat(self) -> np.ndarray:
        return self.counts / self.n

    def r(self, a: int) -> float:
        """r_a = 1 / p_hat[a, 1]; defined only when the cell is non-empty."""
        c = int(self.counts[a, 1])
        if c == 0:
            raise UndefinedUnfairness(f"no samples with A={a}, Y=1")
        return self.n / c

    @property
    def min_positive_share(self) -> float:
        return float(min(self.counts[0, 1], self.counts[1, 1])) / self.n


@dataclass(frozen=True)
class GroundMetric:
    """Transport cost ||x - x'|| + kappa_A |a - a'| + kappa_Y |y - y'|.

    An infinite kappa forbids perturbing that coordinate; the 0 * inf = 0
    convention applies when the coordinate is unchanged.
    """

    feature_norm: str = "l2"
    kappa_a: float = INF
    kappa_y: float = INF

    def __post_init__(self):
        if self.feature_norm not in DUAL_NORM:
            raise ConfigError(f"unknown feature norm {self.feature_norm!r}")
        if not (self.kappa_a > 0 and self.kappa_y > 0):
            raise ConfigError("kappa_A and kappa_Y must lie in (0, inf]")

    @property
    def dual_feature_norm(self) -> str:
        return DUAL_NORM[self.feature_norm]

    @property
    def kappas_infinite(self) -> bool:
        return math.isinf(self.kappa_a) and math.isinf(self.kappa_y)

    def attribute_cost(self, a: int, a2: int, y: int, y2: int) -> float:
        """kappa part of the cost, with the 0 * inf = 0 convention."""
        cost = 0.0
        if a != a2:
            cost += self.kappa_a
        if y != y2:
            cost += self.kappa_y
        return cost

    def cost(self, x, a, y, x2, a2, y2) -> float:
        x = np.asarray(x, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        return norm_value(x - x2, self.feature_norm) + self.attribute_cost(a, a2, y, y2)


@dataclass(frozen=True)
class AmbiguityConfig:
    """Wasserstein ball of radius rho around the empirical distribution,
    intersected with the fixed-(A, Y)-marginal constraint."""

    rho: float
    metric: GroundMetric = field(default_factory=GroundMetric)

    def __post_init__(self):
        if not (self.rho >= 0):
            raise ConfigError("rho must be non-negative")


@dataclass(frozen=True)
class ModelWeights:
    beta: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.beta, dtype=float).ravel()
        if not np.all(np.isfinite(b)):
            raise ContractViolation("weights must be finite")
        object.__setattr__(self, "beta", b)

    @property
    def p(self) -> int:
        return self.beta.shape[0]


@dataclass(frozen=True)
class UnfairnessKind:
    """Which f is plugged into the group-gap unfairness measure."""

    variant: str  # "deterministic" | "probabilistic" | "log_probabilistic"
    tau: float = 0.5

    def __post_init__(self):
        if self.variant not in ("deterministic", "probabilistic", "log_probabilistic"):
            raise ConfigError(f"unknown unfairness variant {self.variant!r}")
        if self.variant == "deterministic" and not (0.0 <= self.tau <= 1.0):
            raise ConfigError("threshold tau must lie in [0, 1]")

    @classmethod
    def deterministic(cls, tau: float = 0.5) -> "UnfairnessKind":
        return cls("deterministic", tau)

    @classmethod
    def probabilistic(cls) -> "UnfairnessKind":
        return cls("probabilistic")

    @classmethod
    def log_probabilistic(cls) -> "UnfairnessKind":
        return cls("log_probabilistic")


# ---------------------------------------------------------------------------
# hypothesis and loss


def softplus(t):
    """log(1 + exp(t)), stable for |t| up to the float range."""
    return np.logaddexp(0.0, t)


def sigmoid(t):
    """1 / (1 + exp(-t)) without overflow on either tail."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def scores(beta: ModelWeights, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != beta.p:
        raise ContractViolation(
            f"feature dimension {X.shape[-1]} does not match weights ({beta.p})"
        )
    return sigmoid(X @ beta.beta)


def sigmoid_score(beta: ModelWeights, x: np.ndarray) -> float:
    """Score h_beta(x) of a single feature vector, in (0, 1)."""
    return float(scores(beta, np.asarray(x, dtype=float)[None, :])[0])


def log_loss(beta: ModelWeights, x: np.ndarray, y: int) -> float:
    """-y log h(x) - (1-y) log(1 - h(x)), computed through softplus."""
    if y not in (0, 1):
        raise ContractViolation("label must be 0 or 1")
    x = np.asarray(x, dtype=float)
    if x.shape != (beta.p,):
        raise ContractViolation("feature dimension does not match weights")
    t = float(x @ beta.beta)
    return float(softplus(-t)) if y == 1 else float(softplus(t))


def mean_log_loss(data: Dataset, beta: ModelWeights) -> float:
    t = data.features @ beta.beta
    sign = np.where(data.labels == 1, -1.0, 1.0)
    return float(np.mean(softplus(sign * t)))


def _f_values(beta: ModelWeights, X: np.ndarray, kind: UnfairnessKind) -> np.ndarray:
    t = X @ beta.beta
    if kind.variant == "deterministic":
        logit_tau = math.log(kind.tau / (1.0 - kind.tau)) if 0 < kind.tau < 1 else None
        if logit_tau is None:
            # tau in {0, 1}: indicator degenerates to a constant comparison
            return (sigmoid(t) >= kind.tau).astype(float)
        return (t >= logit_tau).astype(float)
    if kind.variant == "probabilistic":
        return sigmoid(t)
    # log h(x) = -softplus(-beta.x); the "+1" of 1 + log z cancels in the gap
    return -softplus(-t)


def empirical_unfairness(data: Dataset, beta: ModelWeights, kind: UnfairnessKind) -> float:
    """|E[f(h(X)) | A=1, Y=1] - E[f(h(X)) | A=0, Y=1]| under the empirical law."""
    vals = {}
    for a in (0, 1):
        mask = data.cell_mask(a, 1)
        if not mask.any():
            raise UndefinedUnfairness(f"no samples with A={a}, Y=1")
        vals[a] = float(np.mean(_f_values(beta, data.features[mask], kind)))
    return abs(vals[1] - vals[0])


def accuracy(data: Dataset, beta: ModelWeights, tau: float = 0.5) -> float:
    if not (0.0 < tau < 1.0):
        raise ConfigError("classification threshold must lie in (0, 1)")
    logit_tau = math.log(tau / (1.0 - tau))
    pred = (data.features @ beta.beta >= logit_tau).astype(int)
    return float(np.mean(pred == data.labels))


# ---------------------------------------------------------------------------
# discrete optimal transport


def wasserstein_distance_discrete(p_points, p_weights, q_points, q_weights,
                                  metric: GroundMetric) -> float:
    """Type-1 optimal transport cost between two finitely supported
    distributions on (x, a, y) triples, solved as a coupling LP.

    Arcs with infinite ground cost are excluded; if no finite-cost coupling
    exists the distance is +inf.
    """
    from .solver.lp import Constraint, LpInstance, solve_lp

    p_weights = np.asarray(p_weights, dtype=float)
    q_weights = np.asarray(q_weights, dtype=float)
    if abs(p_weights.sum() - 1.0) > 1e-9 or abs(q_weights.sum() - 1.0) > 1e-9:
        raise ContractViolation("weights must each sum to 1")
    if len(p_points) != len(p_weights) or len(q_points) != len(q_weights):
        raise ContractViolation("points/weights length mismatch")

    m, n = len(p_points), len(q_points)
    cost = np.empty((m, n))
    for i, (x, a, y) in enumerate(p_points):
        for j, (x2, a2, y2) in enumerate(q_points):
            cost[i, j] = metric.cost(x, a, y, x2, a2, y2)

    arcs = [(i, j) for i in range(m) for j in range(n) if math.isfinite(cost[i, j])]
    if not arcs:
        return INF
    col = {arc: k for k, arc in enumerate(arcs)}
    nv = len(arcs)

    constraints = []
    for i in range(m):
        coeff = np.zeros(nv)
        for j in range(n):
            if (i, j) in col:
                coeff[col[(i, j)]] = 1.0
        constraints.append(Constraint(coeff, "=", float(p_weights[i])))
    for j in range(n):
        coeff = np.zeros(nv)
        for i in range(m):
            if (i, j) in col:
                coeff[col[(i, j)]] = 1.0
        constraints.append(Constraint(coeff, "=", float(q_weights[j])))

    obj = np.array([cost[i, j] for (i, j) in arcs])
    sol = solve_lp(LpInstance(obj, constraints, [(0.0, None)] * nv))
    if sol.status != "optimal":
        return INF
    return max(0.0, float(sol.objective))


# ---------------------------------------------------------------------------
# CSV interface


def load_dataset_csv(path, standardize: bool = False) -> Dataset:
    """Read the documented schema: f1..fp columns, then `sensitive`, `label`.

    Missing or non-numeric values are rejected. With standardize=True the
    feature columns are shifted/scaled to zero mean and unit variance
    (constant columns are left untouched).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ContractViolation(f"{path}: empty file")
        if len(header) < 3 or header[-2] != "sensitive" or header[-1] != "label":
            raise ContractViolation(
                f"{path}: header must be f1..fp, sensitive, label"
            )
        p = len(header) - 2
        feats, sens, labs = [], [], []
        for ln, row in enumerate(reader, start=2):
            if len(row) != p + 2 or any(cell.strip() == "" for cell in row):
                raise ContractViolation(f"{path}:{ln}: missing value")
            try:
                feats.append([float(v) for v in row[:p]])
                sens.append(int(row[p]))
                labs.append(int(row[p + 1]))
            except ValueError as exc:
                raise ContractViolation(f"{path}:{ln}: {exc}") from exc
    X = np.asarray(feats, dtype=float)
    if standardize:
        mu = X.mean(axis=0)
        sd = X.std(axis=0)
        sd[sd == 0.0] = 1.0
        X = (X - mu) / sd
    return Dataset(X, np.asarray(sens), np.asarray(labs))


def save_dataset_csv(data: Dataset, path) -> None:
    """Write the schema back out; float formatting via repr for reproducibility."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j+1}" for j in range(data.p)] + ["sensitive", "label"])
        for i in range(data.n):
            writer.writerow(
                [repr(float(v)) for v in data.features[i]]
                + [int(data.sensitive[i]), int(data.labels[i])]
            )
