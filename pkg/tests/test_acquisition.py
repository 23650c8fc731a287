import math

import numpy as np
import pytest

from pumpbo.acquisition import (
    AcqConfig,
    IncumbentState,
    aei,
    ei,
    lcb,
    score,
    score_batch,
    std_normal_cdf,
    std_normal_pdf,
)
from pumpbo.forest import ForestHyper, fit_classifier_xy, fit_regressor_xy

# frozen against a 50-digit mpmath evaluation of the formulas
EI_CASES = [
    (0.0, 1.0, 1.0, 1.0833154705876863),
    (2.5, 0.7, 2.0, 0.09761815655985822),
    (-1.0, 3.0, 0.5, 2.0933896722039181),
    (5.0, 2.0, 4.0, 0.39559311480261206),
]
AEI_CASES = [
    (0.0, 1.0, 1.0, 0.5, 0.5988420639254382),
    (2.5, 0.7, 2.0, 2.0, 0.005480443757789879),
]


class TestNormalHelpers:
    def test_cdf_at_zero(self):
        assert std_normal_cdf(0.0) == 0.5

    def test_pdf_at_zero(self):
        assert abs(std_normal_pdf(0.0) - 0.3989422804014327) < 1e-15

    def test_cdf_symmetry_identity(self):
        for z in np.linspace(-8.0, 8.0, 1001):
            assert abs(std_normal_cdf(z) + std_normal_cdf(-z) - 1.0) <= 1e-12


class TestLcb:
    def test_zero_sigma(self):
        assert lcb(1.0, 0.0, 5.0) == 1.0

    def test_arithmetic(self):
        assert lcb(2.0, 1.0, 1.0) == 1.0

    def test_beta_zero_reduces_to_mu_ordering(self):
        mus = np.array([3.0, 1.0, 2.0])
        sigmas = np.array([0.1, 5.0, 2.0])
        vals = [lcb(m, s, 0.0) for m, s in zip(mus, sigmas)]
        assert np.argmin(vals) == np.argmin(mus)

    def test_argmin_invariant_to_constant_shift(self):
        rng = np.random.default_rng(0)
        mus = rng.normal(size=20)
        sigmas = rng.uniform(0, 2, 20)
        base = [lcb(m, s, 1.3) for m, s in zip(mus, sigmas)]
        shifted = [lcb(m + 42.0, s, 1.3) for m, s in zip(mus, sigmas)]
        assert np.argmin(base) == np.argmin(shifted)


class TestEi:
    def test_zero_sigma_is_exactly_zero(self):
        for mu in (-3.0, 0.0, 7.0):
            assert ei(mu, 0.0, 1.0) == 0.0

    def test_at_incumbent_mean(self):
        s = 1.7
        assert abs(ei(2.0, s, 2.0) - s / math.sqrt(2 * math.pi)) < 1e-14

    @pytest.mark.parametrize("mu,sigma,y_plus,expected", EI_CASES)
    def test_frozen_values(self, mu, sigma, y_plus, expected):
        assert abs(ei(mu, sigma, y_plus) - expected) < 1e-12

    def test_nonnegative(self):
        rng = np.random.default_rng(1)
        for _ in range(500):
            mu = rng.uniform(-100, 100)
            sigma = rng.uniform(0, 50)
            y_plus = rng.uniform(-100, 100)
            assert ei(mu, sigma, y_plus) >= 0.0

    def test_increasing_in_sigma_below_incumbent(self):
        sigmas = np.linspace(0.05, 5.0, 60)
        vals = [ei(0.0, s, 1.0) for s in sigmas]
        assert np.all(np.diff(vals) > 0)


class TestAei:
    def test_zero_noise_identical_to_ei(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            mu = rng.uniform(-10, 10)
            sigma = rng.uniform(0, 5)
            y_plus = rng.uniform(-10, 10)
            assert aei(mu, sigma, y_plus, 0.0) == ei(mu, sigma, y_plus)

    def test_zero_sigma_is_zero(self):
        assert aei(1.0, 0.0, 2.0, 3.0) == 0.0

    @pytest.mark.parametrize("mu,sigma,y_plus,se,expected", AEI_CASES)
    def test_frozen_values(self, mu, sigma, y_plus, se, expected):
        assert abs(aei(mu, sigma, y_plus, se) - expected) < 1e-12

    def test_vanishes_as_noise_grows(self):
        vals = [aei(0.0, 1.0, 1.0, se) for se in (0.0, 1.0, 10.0, 100.0, 1e6)]
        assert np.all(np.diff(vals) < 0)
        assert vals[-1] < 1e-5

    def test_never_exceeds_ei(self):
        rng = np.random.default_rng(3)
        for _ in range(300):
            mu = rng.uniform(-10, 10)
            sigma = rng.uniform(0, 5)
            y_plus = rng.uniform(-10, 10)
            se = rng.uniform(0, 5)
            assert aei(mu, sigma, y_plus, se) <= ei(mu, sigma, y_plus) + 1e-15


def _toy_models(seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (40, 2))
    y = np.sin(3 * X[:, 0]) + X[:, 1]
    reg = fit_regressor_xy(X, y, ForestHyper(n_trees=40, min_leaf=2), seed=1)
    labels = (X[:, 0] < 0.8).astype(float)
    clf = fit_classifier_xy(X, labels, ForestHyper(n_trees=40, min_leaf=1), seed=2)
    return reg, clf


class TestScore:
    def test_weighting_off_equals_raw_acquisition(self):
        reg, clf = _toy_models()
        inc = IncumbentState(0.5)
        Q = np.random.default_rng(4).uniform(0, 1, (20, 2))
        mu, sigma = reg.predict_batch(Q)
        cfg = AcqConfig(kind="ei", feasibility_weighting=False)
        got = score_batch(reg, clf, Q, cfg, inc)
        want = np.array([ei(m, s, 0.5) for m, s in zip(mu, sigma)])
        assert np.allclose(got, want, atol=1e-12)

        cfg = AcqConfig(kind="lcb", beta=0.7, feasibility_weighting=False)
        got = score_batch(reg, clf, Q, cfg, inc)
        want = -(mu - 0.7 * sigma)
        assert np.allclose(got, want, atol=1e-12)

    def test_zero_probability_kills_ei_score(self):
        reg, _ = _toy_models()
        X = np.random.default_rng(5).uniform(0, 1, (30, 2))
        labels = np.r_[np.zeros(15), np.ones(15)]
        clf = fit_classifier_xy(X, labels, ForestHyper(n_trees=10, min_leaf=1), seed=0)
        from pumpbo.forest import FeasibilityModel

        dead = FeasibilityModel(forest=None, constant_p=0.0)
        got = score_batch(reg, dead, X, AcqConfig(kind="ei"), IncumbentState(0.5))
        assert np.all(got == 0.0)

    def test_argmax_matches_bruteforce_ei_loop(self):
        reg, clf = _toy_models()
        Q = np.random.default_rng(6).uniform(0, 1, (200, 2))
        cfg = AcqConfig(kind="ei", feasibility_weighting=False)
        got = score_batch(reg, clf, Q, cfg, IncumbentState(0.4))
        brute = []
        for q in Q:
            mu, sigma = reg.predict_batch(q.reshape(1, -1))
            brute.append(ei(float(mu[0]), float(sigma[0]), 0.4))
        assert np.argmax(got) == np.argmax(brute)

    def test_scalar_matches_batch(self):
        reg, clf = _toy_models()
        q = np.array([0.3, 0.6])
        cfg = AcqConfig(kind="aei", sigma_eps=0.5)
        inc = IncumbentState(0.4)
        assert score(reg, clf, q, cfg, inc) == score_batch(reg, clf, q, cfg, inc)[0]

    def test_weighted_lcb_prefers_feasible_region(self):
        # with equal predictions, the low-probability side must not win
        reg, _ = _toy_models()
        from pumpbo.forest import FeasibilityModel

        half = FeasibilityModel(forest=None, constant_p=1.0)
        dead = FeasibilityModel(forest=None, constant_p=0.0)
        q = np.array([0.3, 0.6])
        cfg = AcqConfig(kind="lcb", beta=1.0)
        inc = IncumbentState(10.0)  # every bound improves on the incumbent
        alive = score(reg, half, q, cfg, inc)
        killed = score(reg, dead, q, cfg, inc)
        assert alive > killed == 0.0

    def test_ei_requires_incumbent(self):
        reg, clf = _toy_models()
        with pytest.raises(ValueError):
            score(reg, clf, np.array([0.1, 0.1]), AcqConfig(kind="ei"), IncumbentState(None))
