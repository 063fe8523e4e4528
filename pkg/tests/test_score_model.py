import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capthresh import score_model as sm

MIX = sm.BetaMixture(((0.7, 2.0, 10.0), (0.3, 8.0, 2.0)))
MIX_MEAN = 0.7 * 2.0 / 12.0 + 0.3 * 8.0 / 10.0  # beta mean identity a/(a+b)


# --- construction invariants -------------------------------------------------


def test_mixture_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        sm.BetaMixture(((0.5, 2, 10), (0.4, 8, 2)))


def test_mixture_shapes_positive():
    with pytest.raises(ValueError):
        sm.BetaMixture(((1.0, 0.0, 2.0),))


def test_empirical_scores_validation():
    with pytest.raises(ValueError):
        sm.EmpiricalScores([])
    with pytest.raises(ValueError):
        sm.EmpiricalScores([0.5, 1.2])


def test_labeled_outcomes_binary():
    with pytest.raises(ValueError):
        sm.EmpiricalLabeled(np.array([0.5, 0.6]), np.array([0.0, 2.0]))


def test_noise_on_empirical_scores_rejected():
    with pytest.raises(ValueError):
        sm.Analytic(sm.EmpiricalScores([0.1, 0.9]), sm.GaussianNoiseClipped(0.1))


# --- mean_true_score ----------------------------------------------------------


def test_mean_uniform(uniform_perfect):
    assert sm.mean_true_score(uniform_perfect) == 0.5


def test_mean_mixture_identity(mixture_perfect):
    assert sm.mean_true_score(mixture_perfect) == pytest.approx(MIX_MEAN, abs=1e-5)


def test_mean_mixture_mc_crosscheck(mixture_perfect):
    draws = MIX.sample(np.random.default_rng(11), 10**7)
    se = draws.std() / math.sqrt(draws.size)
    assert abs(sm.mean_true_score(mixture_perfect) - draws.mean()) < 3 * se


def test_mean_labeled_positive_rate():
    model = sm.EmpiricalLabeled(np.array([0.2, 0.5, 0.9]), np.array([1.0, 0.0, 1.0]))
    assert sm.mean_true_score(model) == pytest.approx(2 / 3)


# --- predicted_quantile -------------------------------------------------------


def test_quantile_identity_predictor(uniform_perfect):
    assert sm.predicted_quantile(uniform_perfect, 0.8) == pytest.approx(0.8)


def test_quantile_empirical_order_statistic():
    model = sm.Analytic(sm.EmpiricalScores([0.1, 0.2, 0.3, 0.4]), sm.Perfect())
    assert sm.predicted_quantile(model, 0.5) == pytest.approx(0.2)


def test_quantile_noisy_vs_mc(uniform_noisy):
    rng = np.random.default_rng(123)
    r = rng.random(10**6)
    r_hat = np.clip(r + 0.1 * rng.standard_normal(r.size), 0.0, 1.0)
    mc = float(np.quantile(r_hat, 0.5))
    assert abs(sm.predicted_quantile(uniform_noisy, 0.5) - mc) < 1e-3


# --- conditional_mean_above ---------------------------------------------------


def test_cma_uniform_top_quintile(uniform_perfect):
    assert sm.conditional_mean_above(uniform_perfect, 0.8) == pytest.approx(0.9, abs=1e-12)


def test_cma_tau_zero_is_mean(uniform_perfect, mixture_perfect, uniform_noisy):
    for model in (uniform_perfect, mixture_perfect, uniform_noisy):
        assert sm.conditional_mean_above(model, 0.0) == pytest.approx(
            sm.mean_true_score(model), abs=1e-12
        )


def test_cma_mixture_vs_mc(mixture_perfect):
    draws = MIX.sample(np.random.default_rng(7), 10**7)
    q = np.quantile(draws, 0.8)
    tail = draws[draws >= q]
    se = tail.std() / math.sqrt(tail.size)
    assert abs(sm.conditional_mean_above(mixture_perfect, 0.8) - tail.mean()) < 3 * se


def test_cma_empty_tail_error():
    model = sm.EmpiricalJoint(np.array([0.2, 0.8]), np.array([0.2, 0.8]))
    with pytest.raises(ValueError, match="empty tail"):
        sm.conditional_mean_above(model, 0.75)


# --- conditional_mean_at -------------------------------------------------------


@pytest.mark.parametrize("tau", [0.7, 0.25])
def test_cm_at_uniform_is_quantile(uniform_perfect, tau):
    assert sm.conditional_mean_at(uniform_perfect, tau) == pytest.approx(tau, abs=1e-12)


def test_cm_at_noisy_matches_mc_finite_difference(uniform_noisy):
    # oracle: central difference of the MC tail-mass curve, step 1e-3
    rng = np.random.default_rng(99)
    r = rng.random(4 * 10**6)
    r_hat = np.clip(r + 0.1 * rng.standard_normal(r.size), 0.0, 1.0)
    h = 1e-3

    def tail_mass(tau):
        q = np.quantile(r_hat, tau)
        sel = r_hat >= q
        return (1.0 - tau) * r[sel].mean()

    oracle = -(tail_mass(0.5 + h) - tail_mass(0.5 - h)) / (2 * h)
    assert abs(sm.conditional_mean_at(uniform_noisy, 0.5) - oracle) < 1e-2


def test_cm_at_empirical_needs_resolution():
    model = sm.EmpiricalJoint(np.linspace(0, 1, 20), np.linspace(0, 1, 20))
    with pytest.raises(ValueError, match="insufficient resolution"):
        sm.conditional_mean_at(model, 0.5, bandwidth=0.05)


def test_cm_at_empirical_bin_average():
    n = 10_000
    values = np.linspace(0.0, 1.0, n)
    model = sm.EmpiricalJoint(values, values)
    est = sm.conditional_mean_at(model, 0.5, bandwidth=0.05)
    assert est == pytest.approx(0.5, abs=0.01)


# --- tpr_at ---------------------------------------------------------------------


def test_tpr_uniform_closed_form(uniform_perfect):
    # perfect ranking of uniform scores: TPR(tau) = 1 - tau^2
    assert sm.tpr_at(uniform_perfect, 0.8) == pytest.approx(0.36, abs=1e-12)
    assert sm.tpr_at(uniform_perfect, 0.0) == pytest.approx(1.0, abs=1e-12)


def test_tpr_labeled_enumeration():
    model = sm.EmpiricalLabeled(np.array([0.9, 0.8, 0.1]), np.array([1.0, 0.0, 1.0]))
    assert sm.tpr_at(model, 2 / 3) == pytest.approx(0.5)


def test_tpr_no_positives_error():
    model = sm.EmpiricalLabeled(np.array([0.9, 0.8]), np.array([0.0, 0.0]))
    with pytest.raises(ValueError, match="no positives"):
        sm.tpr_at(model, 0.5)


def test_tpr_identity(uniform_perfect, mixture_perfect, uniform_noisy):
    for model in (uniform_perfect, mixture_perfect, uniform_noisy):
        er = sm.mean_true_score(model)
        for tau in np.linspace(0.0, 0.95, 20):
            tau = float(tau)
            lhs = sm.tpr_at(model, tau) * er
            rhs = (1.0 - tau) * sm.conditional_mean_above(model, tau)
            assert lhs == pytest.approx(rhs, abs=1e-9)


def test_tpr_identity_empirical_exact():
    rng = np.random.default_rng(5)
    model = sm.EmpiricalLabeled(rng.random(500), (rng.random(500) < 0.3).astype(float))
    er = sm.mean_true_score(model)
    for tau in (0.1, 0.33, 0.5, 0.77):
        assert sm.tpr_at(model, tau) * er == (1.0 - tau) * sm.conditional_mean_above(model, tau)


# --- sample_population -----------------------------------------------------------


def test_sample_perfect_predictor_matches(uniform_perfect):
    pop = sm.sample_population(uniform_perfect, 5, seed=1)
    assert np.array_equal(pop.r, pop.r_hat)
    assert pop.y is None


def test_sample_without_replacement_is_permutation():
    corpus = sm.EmpiricalJoint(np.linspace(0.1, 0.9, 9), np.linspace(0.2, 1.0, 9))
    pop = sm.sample_population(corpus, 9, seed=3, with_replacement=False)
    assert sorted(pop.r_hat) == pytest.approx(sorted(corpus.predicted))
    assert sorted(pop.r) == pytest.approx(sorted(corpus.true))


def test_sample_mean_clt(uniform_perfect):
    pop = sm.sample_population(uniform_perfect, 10**6, seed=7)
    assert abs(pop.r.mean() - 0.5) < 0.002  # 3 sigma/sqrt(n) headroom


def test_sample_binary_mode_outcomes(mixture_perfect):
    pop = sm.sample_population(mixture_perfect, 200_000, binary_mode=True, seed=2)
    assert pop.y is not None
    assert set(np.unique(pop.y)) <= {0.0, 1.0}
    assert pop.y.mean() == pytest.approx(pop.r.mean(), abs=0.005)


def test_sample_determinism(mixture_noisy):
    a = sm.sample_population(mixture_noisy, 1000, binary_mode=True, seed=42)
    b = sm.sample_population(mixture_noisy, 1000, binary_mode=True, seed=42)
    assert np.array_equal(a.r, b.r)
    assert np.array_equal(a.r_hat, b.r_hat)
    assert np.array_equal(a.y, b.y)


# --- distributional invariants ----------------------------------------------------


@pytest.mark.parametrize("model_name", ["uniform_perfect", "uniform_noisy", "mixture_perfect"])
def test_quantile_tail_consistency(model_name, request):
    model = request.getfixturevalue(model_name)
    pop = sm.sample_population(model, 10**6, seed=17)
    for tau in np.arange(0.1, 0.95, 0.1):
        q = sm.predicted_quantile(model, float(tau))
        frac = float((pop.r_hat >= q).mean())
        assert abs(frac - (1.0 - tau)) < 0.005


@pytest.mark.parametrize("sigma", [0.0, 0.2])
def test_monotone_calibration_cma_nondecreasing(sigma):
    predictor = sm.Perfect() if sigma == 0.0 else sm.GaussianNoiseClipped(sigma)
    model = sm.Analytic(sm.Uniform01(), predictor)
    taus = np.linspace(0.0, 0.99, 101)
    values = [sm.conditional_mean_above(model, float(t)) for t in taus]
    assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))


def test_unbiasedness_small_sigma():
    model = sm.Analytic(sm.Uniform01(), sm.GaussianNoiseClipped(0.01))
    pop = sm.sample_population(model, 10**6, seed=4)
    assert abs(pop.r_hat.mean() - pop.r.mean()) <= 0.01


# --- flagged_count convention ------------------------------------------------------


@given(n=st.integers(1, 400), tau=st.floats(0.0, 1.0, allow_nan=False))
@settings(max_examples=200, deadline=None)
def test_flagged_count_convention(n, tau):
    k = sm.flagged_count(n, tau)
    assert 0 <= k <= n
    assert k == n - math.ceil(tau * n - 1e-9)


def test_flagged_count_edges():
    assert sm.flagged_count(100, 0.0) == 100
    assert sm.flagged_count(100, 1.0) == 0
    assert sm.flagged_count(100, 0.8) == 20
    assert sm.flagged_count(3, 2 / 3) == 1
