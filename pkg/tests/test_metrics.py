import numpy as np
import pytest

from capthresh import fluid as fl
from capthresh import metrics as mt
from capthresh import score_model as sm

P = fl.BehavioralParams(0.1, 0.5)


# --- capacity distributions -----------------------------------------------------


def test_capacity_distribution_validation():
    with pytest.raises(ValueError):
        mt.UniformRatio(0.5, 0.5)
    with pytest.raises(ValueError):
        mt.Atoms(((0.2, 0.5), (0.3, 0.6)))
    with pytest.raises(ValueError):
        mt.Atoms(((0.0, 1.0),))


# --- auc_rank --------------------------------------------------------------------


def test_auc_rank_pair_enumeration():
    assert mt.auc_rank([0.9, 0.8, 0.1], [1, 0, 1]) == pytest.approx(0.5)


def test_auc_rank_perfect_separation():
    assert mt.auc_rank([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0


def test_auc_rank_null_distribution():
    rng = np.random.default_rng(31)
    scores = rng.random(10**5)
    labels = rng.random(10**5) < 0.3  # independent of scores
    assert mt.auc_rank(scores, labels.astype(int)) == pytest.approx(0.5, abs=0.01)


def test_auc_rank_ties_half_credit():
    assert mt.auc_rank([0.5, 0.5], [1, 0]) == pytest.approx(0.5)


def test_auc_rank_single_class_error():
    with pytest.raises(ValueError, match="AUC undefined"):
        mt.auc_rank([0.1, 0.9], [1, 1])


# --- auc_integral ------------------------------------------------------------------


def test_auc_integral_uniform(uniform_perfect):
    # integral of (1 - tau^2) dtau = 2/3; AUC = 2 * (2/3 - 1/4) = 5/6
    assert mt.auc_integral(uniform_perfect) == pytest.approx(5 / 6, abs=1e-3)


def test_auc_integral_near_constant_scores():
    model = sm.Analytic(sm.BetaMixture(((1.0, 4000.0, 4000.0),)), sm.Perfect())
    assert mt.auc_integral(model) == pytest.approx(0.5, abs=0.05)


def test_auc_integral_degenerate_mean():
    with pytest.raises(ValueError, match="AUC undefined"):
        mt.auc_integral(sm.EmpiricalLabeled(np.array([0.2, 0.8]), np.array([1.0, 1.0])))


@pytest.mark.parametrize("sigma", [0.0, 0.1])
def test_auc_forms_agree(sigma):
    predictor = sm.Perfect() if sigma == 0.0 else sm.GaussianNoiseClipped(sigma)
    model = sm.Analytic(sm.Uniform01(), predictor)
    pop = sm.sample_population(model, 10**4, binary_mode=True, seed=23)
    rank = mt.auc_rank(pop.r_hat, pop.y.astype(int))
    assert mt.auc_integral(model) == pytest.approx(rank, abs=0.01)


# --- roc_curve ----------------------------------------------------------------------


def test_roc_endpoints(uniform_perfect):
    curve = mt.roc_curve(uniform_perfect, 101)
    assert curve[0] == pytest.approx((1.0, 1.0))
    assert curve[-1] == pytest.approx((0.0, 0.0))


def test_roc_closed_form_point(uniform_perfect):
    curve = mt.roc_curve(uniform_perfect, 2001)
    fpr, tpr = curve[1600]  # tau = 0.8
    assert tpr == pytest.approx(0.36, abs=1e-9)
    assert fpr == pytest.approx((0.2 - 0.18) / 0.5, abs=1e-9)


def test_roc_area_matches_auc(uniform_perfect, mixture_perfect):
    for model in (uniform_perfect, mixture_perfect):
        curve = mt.roc_curve(model, 2001)
        fpr = np.array([q[0] for q in curve])
        tpr = np.array([q[1] for q in curve])
        area = -float(np.trapezoid(tpr, fpr))  # curve runs (1,1) -> (0,0)
        assert area == pytest.approx(mt.auc_integral(model), abs=1e-3)


def test_roc_monotone(mixture_noisy):
    curve = mt.roc_curve(mixture_noisy, 501)
    fpr = [q[0] for q in curve]
    tpr = [q[1] for q in curve]
    assert all(b <= a + 1e-9 for a, b in zip(tpr, tpr[1:]))  # nonincreasing in tau
    assert all(b <= a + 1e-9 for a, b in zip(fpr, fpr[1:]))


# --- opauc ---------------------------------------------------------------------------


def test_opauc_single_atom_anchor(uniform_perfect):
    got = mt.opauc(uniform_perfect, mt.Atoms(((0.2, 1.0),)), P)
    tau_star = 1.2 - np.sqrt(0.24)
    assert got == pytest.approx(0.2 * tau_star / 0.5, abs=5e-4)


def test_opauc_capacity_abundant_collapses_to_mean_rho(uniform_perfect):
    # rho >= p0 + delta_p everywhere: tau* = 0 and TPR = 1, integrand = rho
    mu = mt.Atoms(((0.8, 0.5), (0.9, 0.5)))
    assert mt.opauc(uniform_perfect, mu, P) == pytest.approx(0.85, abs=1e-12)


def test_opauc_closed_form_matches_general(uniform_perfect, mixture_perfect):
    for model in (uniform_perfect, mixture_perfect):
        general = mt.opauc(model, mt.UniformRatio(0.3, 0.5), P)
        closed = mt.opauc_uniform_closed_form(model, 0.3, 0.5, P)
        assert general == pytest.approx(closed, abs=1e-3)


def test_opauc_closed_form_regime_error(uniform_perfect):
    with pytest.raises(ValueError, match="closed form invalid"):
        mt.opauc_uniform_closed_form(uniform_perfect, 0.05, 0.15, P)


def test_quadrature_resolution_self_check(uniform_perfect):
    mu = mt.UniformRatio(0.1, 0.5)
    coarse = mt.opauc(uniform_perfect, mu, P)
    fine = mt.opauc(uniform_perfect, mu, P, rho_nodes=401)
    assert abs(coarse - fine) < 1e-4
    assert abs(mt.auc_integral(uniform_perfect) - mt.auc_integral(uniform_perfect, 4001)) < 1e-4


def test_opauc_closed_form_constant_tpr():
    # all positives carry the top scores: TPR = 1 over the integration range
    n = 1000
    scores = np.linspace(0.0, 1.0, n)
    outcomes = (scores > 0.7).astype(float)
    model = sm.EmpiricalLabeled(scores, outcomes)
    got = mt.opauc_uniform_closed_form(model, 0.3, 0.5, P)
    tau_lo = fl.capacity_matching_threshold(0.5, P)  # 0.2
    tau_hi = fl.capacity_matching_threshold(0.3, P)  # 0.6
    expect = 0.5 * (0.1 + 0.5) * (tau_hi - tau_lo) / 0.2
    assert got == pytest.approx(expect, abs=1e-3)


# --- selection -------------------------------------------------------------------------


def test_select_requires_two_named_candidates(uniform_perfect):
    mu = mt.Atoms(((0.2, 1.0),))
    with pytest.raises(ValueError):
        mt.select_algorithm([mt.AlgorithmCandidate("only", uniform_perfect)], mu, P)
    dup = [
        mt.AlgorithmCandidate("same", uniform_perfect),
        mt.AlgorithmCandidate("same", uniform_perfect),
    ]
    with pytest.raises(ValueError):
        mt.select_algorithm(dup, mu, P)


def test_select_tie_breaks_lexicographically(uniform_perfect):
    mu = mt.Atoms(((0.2, 1.0),))
    cands = [
        mt.AlgorithmCandidate("zeta", uniform_perfect),
        mt.AlgorithmCandidate("alpha", uniform_perfect),
    ]
    report = mt.select_algorithm(cands, mu, P)
    assert report.winner_by_auc == "alpha"
    assert report.winner_by_opauc == "alpha"


def test_selection_soundness_matches_fluid_ordering(crossing_pair, uniform_perfect):
    toprank, smooth = crossing_pair
    mu = mt.Atoms(((0.05, 1 / 3), (0.1, 1 / 3), (0.15, 1 / 3)))

    def mu_fluid(model):
        total = 0.0
        for rho, w in mu.atoms:
            tau = fl.two_point_threshold(rho, model, P)
            total += w * fl.fluid_objective(tau, model, 1.0, rho, P)
        return total

    pairs = [("toprank", toprank), ("smooth", smooth), ("uniform", uniform_perfect)]
    opaucs = {name: mt.opauc(model, mu, P) for name, model in pairs}
    fluids = {name: mu_fluid(model) for name, model in pairs}
    # all three share E[r] = 0.5, so OpAUC order must match the fluid order
    assert sorted(opaucs, key=opaucs.get) == sorted(fluids, key=fluids.get)
    for name, model in pairs:
        er = sm.mean_true_score(model)
        assert opaucs[name] * er == pytest.approx(fluids[name], rel=1e-6)


def test_crossing_pair_flips_winner(crossing_pair):
    toprank, smooth = crossing_pair
    mu = mt.Atoms(((0.05, 1 / 3), (0.1, 1 / 3), (0.15, 1 / 3)))
    report = mt.select_algorithm(
        [mt.AlgorithmCandidate("toprank", toprank), mt.AlgorithmCandidate("smooth", smooth)],
        mu, P,
    )
    assert report.winner_by_auc == "smooth"
    assert report.winner_by_opauc == "toprank"
    assert {len(c.table) for c in report.candidates} == {3}


def test_roc_curves_genuinely_cross(crossing_pair):
    toprank, smooth = crossing_pair
    taus = np.linspace(0.05, 0.95, 30)
    diff = [sm.tpr_at(toprank, float(t)) - sm.tpr_at(smooth, float(t)) for t in taus]
    assert min(diff) < -0.01 and max(diff) > 0.01
