import math

import numpy as np
import pytest

from fairdro.core import (
    AmbiguityConfig,
    ConfigError,
    Dataset,
    GroundMetric,
    MarginalStats,
    ModelWeights,
    UnfairnessKind,
    empirical_unfairness,
    log_loss,
    mean_log_loss,
)
from fairdro.training import (
    TrainConfig,
    drflr_objective_oracle,
    fair_objective,
    fit_drflr,
    fit_flr,
    fit_lr,
    log_h_gradient,
    log_loss_gradient,
    worst_case_objective,
)

from conftest import random_dataset
from oracles import central_difference


def _metric_inf():
    return GroundMetric()


def test_fit_lr_beats_zero(rng):
    d = random_dataset(rng, n=40)
    res = fit_lr(d)
    assert res.objective <= mean_log_loss(d, ModelWeights(np.zeros(2))) + 1e-12
    assert res.objective == pytest.approx(mean_log_loss(d, res.weights))


def test_fair_objective_identity(rng):
    # the two-branch maximum is the loss plus eta times the log unfairness
    for _ in range(5):
        d = random_dataset(rng)
        eta = MarginalStats.from_dataset(d).min_positive_share * 0.5
        beta = ModelWeights(rng.normal(size=2))
        lhs = fair_objective(d, beta, eta)
        rhs = mean_log_loss(d, beta) + eta * empirical_unfairness(
            d, beta, UnfairnessKind.log_probabilistic())
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_eta_bound_enforced(rng):
    d = random_dataset(rng)
    bound = MarginalStats.from_dataset(d).min_positive_share
    with pytest.raises(ConfigError):
        fit_flr(d, TrainConfig(eta=bound + 0.01))
    with pytest.raises(ConfigError):
        fair_objective(d, ModelWeights(np.zeros(2)), bound + 0.01)


def test_flr_degenerates_to_lr(rng):
    for _ in range(3):
        d = random_dataset(rng)
        lr = fit_lr(d)
        flr = fit_flr(d, TrainConfig(eta=0.0))
        assert np.allclose(lr.weights.beta, flr.weights.beta, atol=1e-6)
        assert lr.objective == pytest.approx(flr.objective, abs=1e-10)


def test_drflr_degenerates(rng):
    for _ in range(3):
        d = random_dataset(rng)
        eta = MarginalStats.from_dataset(d).min_positive_share * 0.5
        amb0 = AmbiguityConfig(0.0, _metric_inf())
        flr = fit_flr(d, TrainConfig(eta=eta))
        dr = fit_drflr(d, TrainConfig(eta, amb0))
        assert np.allclose(flr.weights.beta, dr.weights.beta, atol=1e-6)


def test_flr_reduces_unfairness(rng):
    # a larger eta should not increase the penalized objective's unfairness
    d = random_dataset(rng, n=60)
    eta_max = MarginalStats.from_dataset(d).min_positive_share
    kind = UnfairnessKind.log_probabilistic()
    lr = fit_lr(d)
    flr = fit_flr(d, TrainConfig(eta=eta_max))
    assert empirical_unfairness(d, flr.weights, kind) <= \
        empirical_unfairness(d, lr.weights, kind) + 1e-6


def test_drflr_kappa_inf_duals(rng):
    d = random_dataset(rng)
    eta = MarginalStats.from_dataset(d).min_positive_share * 0.5
    stats = MarginalStats.from_dataset(d)
    res = fit_drflr(d, TrainConfig(eta, AmbiguityConfig(0.1, _metric_inf())))
    bstar = float(np.linalg.norm(res.weights.beta))
    assert res.duals.lambda1 == pytest.approx((1 + eta * stats.r(0)) * bstar)
    assert res.duals.lambda0 == pytest.approx((1 + eta * stats.r(1)) * bstar)
    assert res.duals.t == pytest.approx(res.objective)


def test_worst_case_rho0_equals_fair_objective(rng):
    for metric in (_metric_inf(), GroundMetric(kappa_a=0.5, kappa_y=0.5)):
        d = random_dataset(rng, n=10)
        eta = MarginalStats.from_dataset(d).min_positive_share * 0.5
        beta = ModelWeights(rng.normal(size=2))
        wc = worst_case_objective(d, beta, eta, AmbiguityConfig(0.0, metric))
        assert wc == pytest.approx(fair_objective(d, beta, eta), abs=1e-8)


def test_worst_case_monotone_in_rho(rng):
    d = random_dataset(rng, n=12)
    eta = MarginalStats.from_dataset(d).min_positive_share * 0.5
    beta = ModelWeights(rng.normal(size=2))
    for metric in (_metric_inf(), GroundMetric(kappa_a=0.8, kappa_y=0.8)):
        vals = [worst_case_objective(d, beta, eta,
                                     AmbiguityConfig(r, metric))
                for r in np.linspace(0.0, 0.5, 6)]
        assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))


def test_worst_case_kappa_paths_agree(rng):
    # a huge finite kappa must approach the infinite-kappa closed form
    d = random_dataset(rng, n=8)
    eta = MarginalStats.from_dataset(d).min_positive_share * 0.5
    beta = ModelWeights(rng.normal(size=2))
    amb_inf = AmbiguityConfig(0.05, _metric_inf())
    amb_big = AmbiguityConfig(0.05, GroundMetric(kappa_a=1e9, kappa_y=1e9))
    a = worst_case_objective(d, beta, eta, amb_inf)
    b = worst_case_objective(d, beta, eta, amb_big)
    assert a == pytest.approx(b, abs=1e-6)


def test_drflr_finite_kappa_optimizes_worst_case(rng):
    # the fitted objective matches the exact inner LP at the fitted weights,
    # and no nearby weight vector does better
    d = random_dataset(rng, n=15)
    eta = MarginalStats.from_dataset(d).min_positive_share * 0.5
    amb = AmbiguityConfig(0.05, GroundMetric(kappa_a=0.5, kappa_y=0.5))
    res = fit_drflr(d, TrainConfig(eta, amb))
    wc = worst_case_objective(d, res.weights, eta, amb)
    assert res.objective == pytest.approx(wc, abs=1e-6)
    for _ in range(5):
        other = ModelWeights(res.weights.beta + 0.1 * rng.normal(size=2))
        assert worst_case_objective(d, other, eta, amb) >= wc - 1e-6


def test_drflr_objective_upper_bounds_fair(rng):
    d = random_dataset(rng)
    eta = MarginalStats.from_dataset(d).min_positive_share * 0.5
    amb = AmbiguityConfig(0.1, _metric_inf())
    res = fit_drflr(d, TrainConfig(eta, amb))
    assert res.objective >= fair_objective(d, res.weights, eta) - 1e-9


def test_gradient_helpers(rng):
    for _ in range(10):
        beta = ModelWeights(rng.normal(size=3))
        x = rng.normal(size=3)
        y = int(rng.integers(0, 2))
        g = log_loss_gradient(beta, x, y)
        fd = central_difference(
            lambda b: log_loss(ModelWeights(b), x, y), beta.beta)
        assert np.allclose(g, fd, atol=1e-6)
        gh = log_h_gradient(beta, x)
        fdh = central_difference(
            lambda b: -log_loss(ModelWeights(b), x, 1), beta.beta)
        assert np.allclose(gh, fdh, atol=1e-6)


def test_joint_oracle_gradient(rng):
    d = random_dataset(rng, n=6)
    eta = MarginalStats.from_dataset(d).min_positive_share * 0.5
    cfg = TrainConfig(eta, AmbiguityConfig(0.05,
                                           GroundMetric(kappa_a=0.7,
                                                        kappa_y=0.7)))
    oracle = drflr_objective_oracle(d, cfg)
    hits = 0
    for _ in range(20):
        v = rng.normal(size=d.p + 10)
        v[d.p:d.p + 2] = np.abs(v[d.p:d.p + 2]) + 0.5
        f, g = oracle(v)
        fd = central_difference(lambda u: oracle(u)[0], v)
        if np.linalg.norm(fd - g) <= 1e-5 * (1.0 + np.linalg.norm(g)):
            hits += 1
    # kinks are measure zero; nearly every random point is differentiable
    assert hits >= 18


def test_nonconvergence_reported():
    d = Dataset(np.array([[1.0], [-1.0], [1.0], [-1.0]]),
                np.array([0, 1, 1, 0]), np.array([1, 0, 1, 0]))
    res = fit_lr(d, TrainConfig(tol=1e-16, max_iters=5))
    assert not res.converged
    assert res.iterations == 5
