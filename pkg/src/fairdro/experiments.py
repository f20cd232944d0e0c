"""Synthetic generators, stratified resampling, radius cross-validation,
Pareto frontier sweeps, and the benchmark harness.

All randomness flows through counter-based Philox generators so a seed
reproduces byte-identical datasets across platforms.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .core import (
    AmbiguityConfig,
    ConfigError,
    ContractViolation,
    Dataset,
    GroundMetric,
    MarginalStats,
    UndefinedUnfairness,
    UnfairnessKind,
    accuracy,
    empirical_unfairness,
    load_dataset_csv,
    mean_log_loss,
)
from .training import TrainConfig, fit_drflr, fit_flr, fit_lr

try:
    import tomllib as _toml
except ImportError:  # pragma: no cover - python < 3.11
    import tomli as _toml


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


# ---------------------------------------------------------------------------
# synthetic scenarios


@dataclass(frozen=True)
class SyntheticSpec:
    scenario: str  # "boundary" | "frontier" | "two_moons"
    seed: int = 0
    n_major: int = 5000
    n_minor: int = 2000
    n: int = 1000

    def __post_init__(self):
        if self.scenario not in ("boundary", "frontier", "two_moons"):
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if min(self.n_major, self.n_minor, self.n) < 1:
            raise ConfigError("sample counts must be at least 1")


def generate_boundary_demo(seed: int, n_major: int = 5000,
                           n_minor: int = 2000) -> Dataset:
    """Two groups with uniformly random labels and group/label dependent
    Gaussian features; the larger group sits far to the right, so accuracy
    and equal opportunity pull the decision boundary in opposite ways."""
    rng = _rng(seed)
    params = {  # (a, y) -> (mean, variance)
        (1, 1): (np.array([6.0, 0.0]), 3.5),
        (1, 0): (np.array([2.0, 0.0]), 3.5),
        (0, 0): (np.array([-4.0, 0.0]), 5.0),
        (0, 1): (np.array([-2.0, 0.0]), 5.0),
    }
    feats, sens, labs = [], [], []
    for a, count in ((1, n_major), (0, n_minor)):
        y = rng.integers(0, 2, size=count)
        z = rng.normal(size=(count, 2))
        for i in range(count):
            mean, var = params[(a, int(y[i]))]
            feats.append(mean + math.sqrt(var) * z[i])
        sens.extend([a] * count)
        labs.extend(int(v) for v in y)
    return Dataset(np.asarray(feats), np.asarray(sens), np.asarray(labs))


def _gauss2_pdf(x, mean, cov):
    d = x - mean
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
    inv = np.array([[cov[1, 1], -cov[0, 1]], [-cov[1, 0], cov[0, 0]]]) / det
    q = d @ inv @ d
    return math.exp(-0.5 * q) / (2.0 * math.pi * math.sqrt(det))


_FRONTIER_M1 = np.array([2.0, 2.0])
_FRONTIER_S1 = np.array([[5.0, 1.0], [1.0, 5.0]])
_FRONTIER_M0 = np.array([-2.0, -2.0])
_FRONTIER_S0 = np.array([[10.0, 1.0], [1.0, 3.0]])
_ROT = np.array([[math.cos(math.pi / 4), math.sin(math.pi / 4)],
                 [math.sin(math.pi / 4), math.cos(math.pi / 4)]])


def generate_frontier_demo(seed: int, n: int = 1000) -> Dataset:
    """Balanced labels with label-conditional Gaussian features; the
    sensitive attribute is drawn from the class-density ratio evaluated at
    a rotated copy of the features, which couples A with Y."""
    rng = _rng(seed)
    y = rng.integers(0, 2, size=n)
    z = rng.normal(size=(n, 2))
    L1 = np.linalg.cholesky(_FRONTIER_S1)
    L0 = np.linalg.cholesky(_FRONTIER_S0)
    X = np.where((y == 1)[:, None], _FRONTIER_M1 + z @ L1.T,
                 _FRONTIER_M0 + z @ L0.T)
    u = rng.random(n)
    a = np.zeros(n, dtype=int)
    for i in range(n):
        xr = _ROT @ X[i]
        p1 = _gauss2_pdf(xr, _FRONTIER_M1, _FRONTIER_S1)
        p0 = _gauss2_pdf(xr, _FRONTIER_M0, _FRONTIER_S0)
        a[i] = int(u[i] < p1 / (p1 + p0))
    return Dataset(X, a, y)


def generate_two_moons(seed: int, n: int = 1000, noise: float = 0.2) -> Dataset:
    """Interleaved half circles; the label is the moon, the sensitive
    attribute flags the right half of the plane."""
    rng = _rng(seed)
    n1 = n // 2
    n0 = n - n1
    t0 = rng.random(n0) * math.pi
    t1 = rng.random(n1) * math.pi
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    X = np.vstack([upper, lower]) + noise * rng.normal(size=(n, 2))
    y = np.concatenate([np.zeros(n0, dtype=int), np.ones(n1, dtype=int)])
    a = (X[:, 0] > 0.5).astype(int)
    return Dataset(X, a, y)


def generate(spec: SyntheticSpec) -> Dataset:
    if spec.scenario == "boundary":
        return generate_boundary_demo(spec.seed, spec.n_major, spec.n_minor)
    if spec.scenario == "frontier":
        return generate_frontier_demo(spec.seed, spec.n)
    return generate_two_moons(spec.seed, spec.n)


def standardize_features(data: Dataset) -> Dataset:
    """Shift and scale every feature column to zero mean and unit variance;
    constant columns are left untouched."""
    X = data.features
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd == 0.0, 1.0, sd)
    return Dataset((X - mu) / sd, data.sensitive, data.labels)


def add_intercept(data: Dataset) -> Dataset:
    """Append a constant feature so the separator need not pass through the
    origin."""
    ones = np.ones((data.n, 1))
    return Dataset(np.hstack([data.features, ones]), data.sensitive, data.labels)


# ---------------------------------------------------------------------------
# resampling


def stratified_split(data: Dataset, fraction: float, seed: int):
    """Split into (train, rest) preserving every (a, y) cell proportion to
    within rounding."""
    if not (0.0 < fraction < 1.0):
        raise ContractViolation("fraction must lie in (0, 1)")
    rng = _rng(seed)
    take, leave = [], []
    for a in (0, 1):
        for y in (0, 1):
            idx = np.flatnonzero(data.cell_mask(a, y))
            if idx.size == 0:
                raise ContractViolation(f"cell A={a}, Y={y} is empty")
            perm = rng.permutation(idx)
            k = int(round(fraction * idx.size))
            take.extend(perm[:k])
            leave.extend(perm[k:])
    take = np.sort(np.asarray(take, dtype=int))
    leave = np.sort(np.asarray(leave, dtype=int))
    return data.subset(take), data.subset(leave)


def stratified_sample(data: Dataset, n: int, seed: int) -> Dataset:
    """Draw n samples preserving cell proportions, with at least one sample
    from every nonempty cell (largest-remainder apportionment)."""
    if n < 1 or n > data.n:
        raise ContractViolation("sample size out of range")
    cells = [(a, y) for a in (0, 1) for y in (0, 1)
             if data.cell_mask(a, y).any()]
    if n < len(cells):
        raise ContractViolation(f"need at least {len(cells)} samples")
    sizes = np.array([int(data.cell_mask(a, y).sum()) for a, y in cells])
    quota = n * sizes / sizes.sum()
    counts = np.maximum(1, np.floor(quota).astype(int))
    counts = np.minimum(counts, sizes)
    order = np.argsort(-(quota - counts), kind="stable")
    k = 0
    while counts.sum() < n:
        c = order[k % len(cells)]
        if counts[c] < sizes[c]:
            counts[c] += 1
        k += 1
    while counts.sum() > n:
        c = int(np.argmax(counts))
        counts[c] -= 1
    rng = _rng(seed)
    picked = []
    for (a, y), m in zip(cells, counts):
        idx = np.flatnonzero(data.cell_mask(a, y))
        picked.extend(rng.permutation(idx)[:m])
    return data.subset(np.sort(np.asarray(picked, dtype=int)))


# ---------------------------------------------------------------------------
# radius cross-validation


def default_rho_grid(num: int = 50) -> np.ndarray:
    return np.logspace(math.log10(5e-5), math.log10(5e-1), num)


def default_eta(data: Dataset) -> float:
    return MarginalStats.from_dataset(data).min_positive_share / 2.0


@dataclass
class CvProtocol:
    grid: np.ndarray = field(default_factory=default_rho_grid)
    threshold_fraction: float = 0.85
    k1: int = 5
    k2: int = 10
    k3: int = 10
    sub_train: int = None  # None: use a 0.7 stratified split
    seed: int = 0

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if g.size == 0 or np.any(np.diff(g) < 0):
            raise ConfigError("rho grid must be nonempty and sorted ascending")
        if not (0.0 <= self.threshold_fraction <= 1.0):
            raise ConfigError("threshold fraction must lie in [0, 1]")
        if self.k1 < 1:
            raise ConfigError("k1 must be at least 1")
        self.grid = g


@dataclass
class CvResult:
    chosen_rho: float
    accuracies: np.ndarray  # mean validation accuracy per grid point
    unfairness: np.ndarray  # mean validation log-prob unfairness
    shortlist: np.ndarray  # indices into the grid
    fallback: bool  # True when the shortlist was empty


def cross_validate_rho(train: Dataset, protocol: CvProtocol,
                       cfg: TrainConfig) -> CvResult:
    """Pick the ball radius: shortlist the grid points whose validation
    accuracy clears a band below the best accuracy, then choose the
    shortlisted radius with the least log-probabilistic unfairness."""
    grid = protocol.grid
    acc = np.zeros((protocol.k1, grid.size))
    unf = np.zeros((protocol.k1, grid.size))
    base = np.zeros(protocol.k1)
    logprob = UnfairnessKind.log_probabilistic()
    for rep in range(protocol.k1):
        seed = protocol.seed + 1000 * rep
        if protocol.sub_train is None:
            sub, val = stratified_split(train, 0.7, seed)
        else:
            sub = stratified_sample(train, protocol.sub_train, seed)
            val = train
        base[rep] = max(np.mean(val.labels), 1.0 - np.mean(val.labels))
        for j, rho in enumerate(grid):
            sub_cfg = TrainConfig(
                cfg.eta, AmbiguityConfig(float(rho), cfg.ambiguity.metric),
                cfg.tol, cfg.max_iters)
            fit = fit_drflr(sub, sub_cfg)
            acc[rep, j] = accuracy(val, fit.weights)
            unf[rep, j] = empirical_unfairness(val, fit.weights, logprob)
    mean_acc = acc.mean(axis=0)
    mean_unf = unf.mean(axis=0)
    acc_base = float(base.mean())
    acc_max = float(mean_acc.max())
    threshold = acc_base + protocol.threshold_fraction * (acc_max - acc_base)
    shortlist = np.flatnonzero(mean_acc >= threshold - 1e-12)
    fallback = shortlist.size == 0
    if fallback:
        chosen = int(np.argmax(mean_acc))
        shortlist = np.array([], dtype=int)
    else:
        chosen = int(shortlist[np.argmin(mean_unf[shortlist])])
    return CvResult(float(grid[chosen]), mean_acc, mean_unf, shortlist,
                    fallback)


# ---------------------------------------------------------------------------
# Pareto frontier


@dataclass
class FrontierPoint:
    eta: float
    train_loss: float = math.nan
    train_unfairness: float = math.nan
    test_loss: float = math.nan
    test_unfairness: float = math.nan
    accuracy: float = math.nan
    true_loss: float = math.nan
    true_unfairness: float = math.nan
    error: str = None


def pareto_frontier(data_train: Dataset, data_test: Dataset, eta_grid,
                    ambiguity: AmbiguityConfig, cfg: TrainConfig = None,
                    true_data: Dataset = None):
    """Sweep the unfairness budget and record in-sample, out-of-sample and
    (optionally) fresh-sample loss/unfairness per grid point."""
    cfg = cfg or TrainConfig()
    logprob = UnfairnessKind.log_probabilistic()
    points = []
    for eta in eta_grid:
        pt = FrontierPoint(eta=float(eta))
        try:
            fit_cfg = TrainConfig(float(eta), ambiguity, cfg.tol, cfg.max_iters)
            fit = fit_drflr(data_train, fit_cfg)
            w = fit.weights
            pt.train_loss = mean_log_loss(data_train, w)
            pt.train_unfairness = empirical_unfairness(data_train, w, logprob)
            pt.test_loss = mean_log_loss(data_test, w)
            pt.test_unfairness = empirical_unfairness(data_test, w, logprob)
            pt.accuracy = accuracy(data_test, w)
            if true_data is not None:
                pt.true_loss = mean_log_loss(true_data, w)
                pt.true_unfairness = empirical_unfairness(true_data, w, logprob)
        except (ConfigError, ContractViolation, UndefinedUnfairness) as exc:
            pt.error = str(exc)
        points.append(pt)
    return points


def frontier_gap(points) -> float:
    """Mean distance between the in-sample and out-of-sample frontier
    points, in the (loss, unfairness) plane."""
    gaps = [
        abs(pt.train_loss - pt.test_loss)
        + abs(pt.train_unfairness - pt.test_unfairness)
        for pt in points if pt.error is None
    ]
    if not gaps:
        raise ContractViolation("no successful frontier points")
    return float(np.mean(gaps))


# ---------------------------------------------------------------------------
# benchmark harness


_METHODS = ("LR", "FLR", "DRFLR")


def _load_benchmark_config(path) -> dict:
    with open(path, "rb") as fh:
        raw = _toml.load(fh)
    for section in ("dataset", "method", "protocol"):
        if section not in raw:
            raise ConfigError(f"benchmark config missing [{section}] section")
    return raw


def _dataset_from_config(dcfg: dict) -> Dataset:
    source = dcfg.get("source", "csv")
    seed = int(dcfg.get("seed", 0))
    if source == "boundary":
        data = generate_boundary_demo(seed, int(dcfg.get("n_major", 5000)),
                                      int(dcfg.get("n_minor", 2000)))
    elif source == "frontier":
        data = generate_frontier_demo(seed, int(dcfg.get("n", 1000)))
    elif source == "two_moons":
        data = generate_two_moons(seed, int(dcfg.get("n", 1000)))
    elif source == "csv":
        path = dcfg.get("path")
        if not path:
            raise ConfigError("[dataset] path required for source='csv'")
        data = load_dataset_csv(path, standardize=bool(dcfg.get("standardize",
                                                                False)))
    else:
        raise ConfigError(f"unknown dataset source {source!r}")
    if source != "csv" and bool(dcfg.get("standardize", False)):
        data = standardize_features(data)
    if bool(dcfg.get("add_intercept", True)):
        data = add_intercept(data)
    return data


def _metric_from_config(mcfg: dict) -> GroundMetric:
    def kap(v):
        if isinstance(v, str):
            if v != "inf":
                raise ConfigError(f"kappa must be a number or 'inf', got {v!r}")
            return math.inf
        return float(v)

    return GroundMetric(
        feature_norm=mcfg.get("norm", "l2"),
        kappa_a=kap(mcfg.get("kappa_a", "inf")),
        kappa_y=kap(mcfg.get("kappa_y", "inf")),
    )


def _fit_method(name: str, train: Dataset, eta: float,
                ambiguity: AmbiguityConfig, tol: float, max_iters: int):
    if name == "LR":
        return fit_lr(train, TrainConfig(0.0, ambiguity, tol, max_iters))
    cfg = TrainConfig(eta, ambiguity, tol, max_iters)
    if name == "FLR":
        return fit_flr(train, cfg)
    if name == "DRFLR":
        return fit_drflr(train, cfg)
    raise ConfigError(f"unknown method {name!r}")


def run_benchmark(config_path, out_dir) -> dict:
    """Run the configured methods over repeated stratified subsamples and
    write report.json / metrics.csv (plus an optional scatter SVG)."""
    raw = _load_benchmark_config(config_path)
    dcfg, mcfg, pcfg = raw["dataset"], raw["method"], raw["protocol"]

    report = {"config": raw, "methods": {}, "errors": []}
    try:
        data = _dataset_from_config(dcfg)
    except (OSError, ContractViolation, ConfigError) as exc:
        report["errors"].append({"dataset": str(exc)})
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            json.dump(report, fh, indent=2, default=str)
        return report

    metric = _metric_from_config(mcfg)
    rho = float(mcfg.get("rho", 0.0))
    tau = float(mcfg.get("tau", 0.5))
    names = list(mcfg.get("names", list(_METHODS)))
    tol = float(pcfg.get("tol", 1e-10))
    max_iters = int(pcfg.get("max_iters", 30000))
    n_train = int(pcfg.get("n_train", 25))
    k2 = int(pcfg.get("k2", 10))
    seed = int(pcfg.get("seed", 0))
    test_fraction = float(pcfg.get("test_fraction", 0.5))

    pool, test = stratified_split(data, 1.0 - test_fraction, seed)
    kinds = {
        "det_unf": UnfairnessKind.deterministic(tau),
        "prob_unf": UnfairnessKind.probabilistic(),
        "logprob_unf": UnfairnessKind.log_probabilistic(),
    }
    rows = []
    per_method = {name: {k: [] for k in ("accuracy", *kinds)} for name in names}
    for rep in range(k2):
        train = stratified_sample(pool, n_train, seed + 7919 * (rep + 1))
        eta_cfg = mcfg.get("eta", "auto")
        eta = default_eta(train) if eta_cfg == "auto" else float(eta_cfg)
        eta = min(eta, MarginalStats.from_dataset(train).min_positive_share)
        for name in names:
            try:
                fit = _fit_method(name, train, eta,
                                  AmbiguityConfig(rho, metric), tol, max_iters)
            except (ConfigError, ContractViolation, UndefinedUnfairness) as exc:
                report["errors"].append({"method": name, "rep": rep,
                                         "error": str(exc)})
                continue
            row = {"rep": rep, "method": name,
                   "accuracy": accuracy(test, fit.weights, tau)}
            for key, kind in kinds.items():
                row[key] = empirical_unfairness(test, fit.weights, kind)
            rows.append(row)
            for key in per_method[name]:
                per_method[name][key].append(row[key])

    for name, cols in per_method.items():
        report["methods"][name] = {
            key: {
                "mean": float(np.mean(vals)) if vals else math.nan,
                "std": float(np.std(vals)) if len(vals) > 1 else 0.0,
            }
            for key, vals in cols.items()
        }

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, default=str)
    with open(os.path.join(out_dir, "metrics.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["rep", "method", "accuracy", *kinds])
        writer.writeheader()
        writer.writerows(rows)
    if bool(raw.get("output", {}).get("svg", False)) and data.p >= 2:
        from .svg import scatter_svg
        groups = {}
        for a in (0, 1):
            for y in (0, 1):
                mask = data.cell_mask(a, y)
                groups[f"A={a}, Y={y}"] = data.features[mask][:500, :2]
        with open(os.path.join(out_dir, "data.svg"), "w") as fh:
            fh.write(scatter_svg(groups, title="dataset"))
    return report
