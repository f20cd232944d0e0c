import math

import numpy as np
import pytest

from fairdro.core import (
    AmbiguityConfig,
    ConfigError,
    ContractViolation,
    Dataset,
    GroundMetric,
    ModelWeights,
    UnfairnessKind,
    empirical_unfairness,
    wasserstein_distance_discrete,
)
from fairdro.quantify import (
    AuditInstance,
    ClassifierRegions,
    audit_report,
    compute_v,
    compute_v_knapsack,
    extremal_distribution,
    fairness_distance,
    unfairness_interval,
)

from conftest import random_dataset
from oracles import transport_v_primal


def _linear_fixture(rng, n=8, p=2):
    d = random_dataset(rng, n=n, p=p)
    beta = ModelWeights(rng.normal(size=p))
    return d, beta, ClassifierRegions.linear(beta, 0.5)


# ---------------------------------------------------------------------------
# regions


def test_linear_distances_closed_form(rng):
    beta = ModelWeights(np.array([2.0, -1.0]))
    for norm, dual in (("l2", "l2"), ("l1", "linf"), ("linf", "l1")):
        reg = ClassifierRegions.linear(beta, 0.5, norm)
        X = rng.normal(size=(20, 2))
        t = X @ beta.beta
        dn = {"l2": math.sqrt(5.0), "linf": 2.0, "l1": 3.0}[dual]
        d1 = reg.distance(X, 1)
        d0 = reg.distance(X, 0)
        assert np.allclose(d1, np.maximum(0.0, -t) / dn)
        assert np.allclose(d0, np.maximum(0.0, t) / dn)
        # exactly one side is at distance zero
        assert np.all((d1 == 0) | (d0 == 0))


def test_linear_projection_lands_on_boundary(rng):
    beta = ModelWeights(np.array([1.5, -0.7, 0.2]))
    for norm in ("l2", "l1", "linf"):
        reg = ClassifierRegions.linear(beta, 0.3, norm)
        b0 = math.log(0.3 / 0.7)
        for _ in range(10):
            x = rng.normal(size=3) * 3
            proj = reg.projection(x)
            assert float(proj @ beta.beta) == pytest.approx(b0, abs=1e-9)
            # the move realizes the claimed distance
            d = reg.distance(x[None, :], 1)[0] + reg.distance(x[None, :], 0)[0]
            moved = proj - x
            nv = {"l2": np.linalg.norm(moved),
                  "l1": np.abs(moved).sum(),
                  "linf": np.abs(moved).max()}[norm]
            assert nv == pytest.approx(d, abs=1e-9)


def test_tau_must_be_interior():
    beta = ModelWeights(np.array([1.0]))
    with pytest.raises(ConfigError):
        ClassifierRegions.linear(beta, 0.0)
    with pytest.raises(ConfigError):
        ClassifierRegions.linear(beta, 1.0)


def test_plugin_heuristic_close_to_linear(rng):
    beta = ModelWeights(np.array([1.0, -2.0]))
    ref = random_dataset(rng, n=200)
    exact = ClassifierRegions.linear(beta, 0.5)

    def score(X):
        return 1.0 / (1.0 + np.exp(-(np.atleast_2d(X) @ beta.beta)))

    heur = ClassifierRegions.plugin(score, 0.5, ref)
    X = rng.normal(size=(15, 2))
    de = exact.distance(X, 1)
    dh = heur.distance(X, 1)
    # a heuristic upper bound that should be reasonably tight in 2d
    assert np.all(dh >= de - 1e-9)
    assert np.all(dh <= de * 3 + 0.5)


# ---------------------------------------------------------------------------
# V values


def test_rho0_is_empirical(rng):
    d, beta, reg = _linear_fixture(rng)
    inst = AuditInstance(d, reg, AmbiguityConfig(0.0, GroundMetric()))
    assert compute_v(inst, 1, 0) == pytest.approx(inst.empirical_v(1, 0))
    v, z = compute_v_knapsack(inst, 1, 0)
    assert v == pytest.approx(inst.empirical_v(1, 0))
    assert not z.any()
    iv = unfairness_interval(inst)
    det = empirical_unfairness(d, beta, UnfairnessKind.deterministic(0.5))
    assert iv.lower == pytest.approx(det) and iv.upper == pytest.approx(det)


def test_pair_validation(rng):
    d, _, reg = _linear_fixture(rng)
    inst = AuditInstance(d, reg, AmbiguityConfig(0.1, GroundMetric()))
    with pytest.raises(ContractViolation):
        compute_v(inst, 1, 1)
    finite = AuditInstance(d, reg, AmbiguityConfig(
        0.1, GroundMetric(kappa_a=1.0, kappa_y=1.0)))
    with pytest.raises(ContractViolation):
        compute_v_knapsack(finite, 1, 0)
    with pytest.raises(ContractViolation):
        extremal_distribution(finite, 1, 0)


@pytest.mark.parametrize("seed", range(8))
def test_strong_duality_tiny_fixtures(seed):
    rng = np.random.default_rng(500 + seed)
    d = random_dataset(rng, n=4, p=2)
    beta = ModelWeights(rng.normal(size=2))
    reg = ClassifierRegions.linear(beta, 0.5)
    ka, ky = float(rng.uniform(0.2, 2)), float(rng.uniform(0.2, 2))
    rho = float(rng.choice([0.05, 0.1, 0.5]))
    inst = AuditInstance(d, reg, AmbiguityConfig(
        rho, GroundMetric(kappa_a=ka, kappa_y=ky)))
    for (a, ap) in ((1, 0), (0, 1)):
        dual = compute_v(inst, a, ap)
        primal = transport_v_primal(d, beta.beta, 0.0, rho, ka, ky, a, ap)
        assert dual == pytest.approx(primal, abs=1e-6)


@pytest.mark.parametrize("seed", range(8))
def test_knapsack_matches_lp(seed):
    rng = np.random.default_rng(900 + seed)
    d = random_dataset(rng, n=int(rng.integers(6, 14)))
    beta = ModelWeights(rng.normal(size=2))
    reg = ClassifierRegions.linear(beta, 0.5)
    rho = float(rng.uniform(0.01, 0.3))
    inst_inf = AuditInstance(d, reg, AmbiguityConfig(rho, GroundMetric()))
    inst_big = AuditInstance(d, reg, AmbiguityConfig(
        rho, GroundMetric(kappa_a=1e9, kappa_y=1e9)))
    for (a, ap) in ((1, 0), (0, 1)):
        vk, _ = compute_v_knapsack(inst_inf, a, ap)
        assert compute_v(inst_inf, a, ap) == pytest.approx(vk, abs=1e-9)
        assert compute_v(inst_big, a, ap) == pytest.approx(vk, abs=1e-6)


def test_hand_knapsack_gain():
    # exactly one movable item: a group-1 positive at distance 2 with
    # r_1 = 2; the group-0 positive sits outside X1 so it cannot move out
    X = np.array([[-2.0], [-1.0], [1.0], [-1.0]])
    d = Dataset(X, np.array([1, 0, 1, 0]), np.array([1, 1, 1, 0]))
    beta = ModelWeights(np.array([1.0]))
    reg = ClassifierRegions.linear(beta, 0.5)  # X1 = {x >= 0}
    n = 4
    inst = AuditInstance(d, reg, AmbiguityConfig(1.0 / n, GroundMetric()))
    v, z = compute_v_knapsack(inst, 1, 0)
    v_hat = inst.empirical_v(1, 0)
    assert v_hat == pytest.approx(0.5)
    # budget N*rho = 1 buys half the item: gain = (1/N) * r_1 * z = 0.25
    assert z.tolist() == [0.5, 0.0, 0.0, 0.0]
    assert v == pytest.approx(v_hat + (1.0 / n) * 2.0 * 0.5)


def test_interval_properties(rng):
    d, _, reg = _linear_fixture(rng, n=12)
    prev = None
    for rho in (0.0, 0.02, 0.1, 0.5):
        inst = AuditInstance(d, reg, AmbiguityConfig(rho, GroundMetric()))
        iv = unfairness_interval(inst)
        assert 0.0 <= iv.lower <= iv.upper + 1e-12
        assert iv.upper <= 1.0 + 1e-9
        assert abs(iv.v10) <= 1.0 + 1e-9 and abs(iv.v01) <= 1.0 + 1e-9
        if prev is not None:
            assert iv.lower <= prev.lower + 1e-9
            assert iv.upper >= prev.upper - 1e-9
        prev = iv


def test_compute_v_monotone_in_rho(rng):
    d, _, reg = _linear_fixture(rng, n=6)
    metric = GroundMetric(kappa_a=0.6, kappa_y=0.6)
    vals = [compute_v(AuditInstance(d, reg, AmbiguityConfig(r, metric)), 1, 0)
            for r in np.linspace(0.0, 0.4, 6)]
    assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# extremal distribution


@pytest.mark.parametrize("seed", range(6))
def test_extremal_invariants(seed):
    rng = np.random.default_rng(300 + seed)
    d = random_dataset(rng, n=int(rng.integers(5, 12)))
    beta = ModelWeights(rng.normal(size=2))
    reg = ClassifierRegions.linear(beta, 0.5)
    rho = float(rng.uniform(0.01, 0.2))
    metric = GroundMetric()
    inst = AuditInstance(d, reg, AmbiguityConfig(rho, metric))
    a, ap = (1, 0) if seed % 2 else (0, 1)
    ex = extremal_distribution(inst, a, ap)
    assert ex.weights.sum() == pytest.approx(1.0, abs=1e-12)
    # (A, Y) marginal is untouched
    marg = {}
    for (x, aa, yy), wgt in zip(ex.support, ex.weights):
        marg[(aa, yy)] = marg.get((aa, yy), 0.0) + wgt
    for aa in (0, 1):
        for yy in (0, 1):
            expect = float(inst.stats.counts[aa, yy]) / d.n
            assert marg.get((aa, yy), 0.0) == pytest.approx(expect, abs=1e-12)
    # within budget
    src = [(d.features[i], int(d.sensitive[i]), int(d.labels[i]))
           for i in range(d.n)]
    cost = wasserstein_distance_discrete(src, np.full(d.n, 1.0 / d.n),
                                         ex.support, ex.weights, metric)
    assert cost <= rho + 1e-9
    # suboptimality is exactly the boundary gap
    v, _ = compute_v_knapsack(inst, a, ap)
    assert ex.objective_value == pytest.approx(v - ex.boundary_gap, abs=1e-9)
    assert ex.objective_value <= v + 1e-12


def test_extremal_rho0_is_empirical(rng):
    d, _, reg = _linear_fixture(rng)
    inst = AuditInstance(d, reg, AmbiguityConfig(0.0, GroundMetric()))
    ex = extremal_distribution(inst, 1, 0)
    assert len(ex.support) == d.n
    assert not ex.moved_indices.size
    assert np.allclose(ex.weights, 1.0 / d.n)


# ---------------------------------------------------------------------------
# fairness distance


def test_fairness_distance_already_fair():
    X = np.array([[1.0], [1.0], [-1.0], [-1.0]])
    d = Dataset(X, np.array([1, 0, 1, 0]), np.array([1, 1, 0, 0]))
    reg = ClassifierRegions.linear(ModelWeights(np.array([1.0])), 0.5)
    assert fairness_distance(d, reg, GroundMetric()) == 0.0


def test_fairness_distance_hand_fixture():
    X = np.array([[-2.0], [1.0], [3.0], [-1.0]])
    d = Dataset(X, np.array([1, 0, 1, 0]), np.array([1, 1, 1, 0]))
    reg = ClassifierRegions.linear(ModelWeights(np.array([1.0])), 0.5)
    # v(1,0) at rho=0 is 0.5 - 1 = -0.5. The cheapest fix moves half of the
    # group-0 positive at x=1 out of X1 (reward/weight 4/1 beats the group-1
    # positive's 2/2): z = 0.5 at distance 1, so rho_hat = 0.5 / N = 0.125.
    rho_hat = fairness_distance(d, reg, GroundMetric(), tolerance=1e-8)
    assert rho_hat == pytest.approx(0.125, abs=1e-6)


def test_fairness_distance_monotone_under_padding(rng):
    d = Dataset(np.array([[-2.0], [1.0], [3.0], [-1.0]]),
                np.array([1, 0, 1, 0]), np.array([1, 1, 1, 0]))
    reg = ClassifierRegions.linear(ModelWeights(np.array([1.0])), 0.5)
    base = fairness_distance(d, reg, GroundMetric(), tolerance=1e-8)
    # appending already-fair mass dilutes the per-sample budget requirement
    X2 = np.vstack([d.features, [[4.0], [4.0], [-3.0], [-3.0]]])
    a2 = np.concatenate([d.sensitive, [1, 0, 1, 0]])
    y2 = np.concatenate([d.labels, [1, 1, 0, 0]])
    padded = fairness_distance(Dataset(X2, a2, y2), reg, GroundMetric(),
                               tolerance=1e-8)
    assert padded <= base + 1e-6


# ---------------------------------------------------------------------------
# report


def test_audit_report_schema(rng):
    d, _, reg = _linear_fixture(rng, n=10)
    inst = AuditInstance(d, reg, AmbiguityConfig(0.05, GroundMetric()))
    report = audit_report(inst, rho_hat=0.01)
    for key in ("rho", "kappa_A", "kappa_Y", "tau", "v10", "v01",
                "lower", "upper", "rho_hat", "moved", "boundary_indices"):
        assert key in report
    assert report["kappa_A"] == "inf"
    assert report["upper"] == pytest.approx(max(report["v10"], report["v01"]))
    for entry in report["moved"]:
        assert set(entry) == {"index", "z", "distance"}
        assert 0.0 < entry["z"] <= 1.0


def test_boundary_samples_flagged():
    X = np.array([[0.0], [1.0], [-1.0], [2.0]])
    d = Dataset(X, np.array([1, 0, 1, 0]), np.array([1, 1, 1, 0]))
    reg = ClassifierRegions.linear(ModelWeights(np.array([1.0])), 0.5)
    inst = AuditInstance(d, reg, AmbiguityConfig(0.1, GroundMetric()))
    assert inst.boundary_indices.tolist() == [0]
    report = audit_report(inst)
    assert report["boundary_indices"] == [0]
    # boundary samples are never moved
    _, z = compute_v_knapsack(inst, 0, 1)
    assert z[0] == 0.0
