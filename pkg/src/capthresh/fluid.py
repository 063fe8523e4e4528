"""Deterministic (fluid) planning: thresholds, objectives, suboptimality gaps.

The fluid model replaces the stochastic request count with its expectation and
empirical quantiles with population quantiles.  For a flagging threshold tau
with behavioral parameters (p0, delta_p):

* expected served requests  n_served = min(n * (p0 + delta_p * (1 - tau)), m)
* efficacy per served slot  r_slot   = (p0 E[r] + delta_p (1-tau) E[r | top]) / (p0 + delta_p (1-tau))
* objective                 w        = n_served * r_slot

Thresholds implemented here:

* capacity-matching  tau_c   -- flags exactly enough to fill capacity in
  expectation; ignores which requests crowd out which.
* score-optimal      tau_s   -- maximizes efficacy per slot; the unique root
  of a strictly decreasing first-order condition for analytic models, a grid
  argmax for empirical corpora.
* two-point optimal  tau*    -- min(tau_s, tau_c), the fluid-optimal rule.
* critical baseline  p0_bar  -- the smallest baseline request probability at
  which the score-optimal threshold starts to bind.

Everything is a pure function of immutable inputs; sweeps are embarrassingly
parallel and bitwise independent of evaluation order.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .score_model import (
    JointScoreModel,
    _cond_mean_at_boundary,
    conditional_mean_above,
    conditional_mean_top,
    flagged_count,
    is_empirical,
    mean_true_score,
)

BISECT_TOL = 1e-8
DEFAULT_GRID = 2001


@dataclass(frozen=True)
class BehavioralParams:
    """Baseline request probability p0 and nudge lift delta_p."""

    p0: float
    delta_p: float

    def __post_init__(self):
        if self.p0 < 0 or self.delta_p < 0:
            raise ValueError("p0 and delta_p must be nonnegative")
        if self.p0 + self.delta_p > 1.0 + 1e-12:
            raise ValueError("p0 + delta_p must not exceed 1")


@dataclass(frozen=True)
class FluidPoint:
    """Fluid quantities at one threshold."""

    tau: float
    n_served: float
    r_per_slot: float
    objective: float


# --- threshold policies -----------------------------------------------------


@dataclass(frozen=True)
class Fixed:
    """A threshold that never reacts to operational parameters."""

    tau: float

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("fixed tau must be in [0, 1]")


@dataclass(frozen=True)
class CapacityMatching:
    pass


@dataclass(frozen=True)
class ScoreOptimal:
    pass


@dataclass(frozen=True)
class TwoPointOptimal:
    pass


@dataclass(frozen=True)
class GridOracle:
    """Argmax of the fluid objective on an evenly spaced tau grid."""

    grid_size: int = DEFAULT_GRID

    def __post_init__(self):
        if self.grid_size < 2:
            raise ValueError("grid_size must be >= 2")


ThresholdPolicy = Fixed | CapacityMatching | ScoreOptimal | TwoPointOptimal | GridOracle


@dataclass(frozen=True)
class GapPoint:
    """One point of a suboptimality sweep."""

    x: float
    tau_policy: float
    tau_star: float
    objective_policy: float
    objective_star: float
    gap: float
    rel_gap: float


# --- fluid primitives -------------------------------------------------------


def capacity_matching_threshold(rho: float, params: BehavioralParams) -> float:
    """Threshold at which expected requests equal capacity n*rho."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if params.delta_p == 0:
        return 1.0 if rho <= params.p0 else 0.0
    return min(1.0, max(0.0, 1.0 - (rho - params.p0) / params.delta_p))


def fluid_demand(tau: float, n: float, params: BehavioralParams) -> float:
    """Expected request count before the capacity cap."""
    return n * (params.p0 + params.delta_p * (1.0 - tau))


def fluid_served(tau: float, n: float, m: float, params: BehavioralParams) -> float:
    """Expected served requests: demand capped at capacity."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    if n < 1:
        raise ValueError("n must be >= 1")
    return min(fluid_demand(tau, n, params), m)


def fluid_efficacy(tau: float, model: JointScoreModel, params: BehavioralParams) -> float:
    """Mean true score of a served request at threshold tau."""
    w = params.delta_p * (1.0 - tau)
    denom = params.p0 + w
    if denom <= 0.0:
        raise ValueError("no requests")
    er = mean_true_score(model)
    if w == 0.0:
        return er
    return (params.p0 * er + w * conditional_mean_above(model, tau)) / denom


def fluid_objective(
    tau: float, model: JointScoreModel, n: float, m: float, params: BehavioralParams
) -> float:
    """Expected total served value in the fluid model."""
    served = fluid_served(tau, n, m, params)
    if served == 0.0:
        return 0.0
    return served * fluid_efficacy(tau, model, params)


def fluid_point(
    tau: float, model: JointScoreModel, n: float, m: float, params: BehavioralParams
) -> FluidPoint:
    served = fluid_served(tau, n, m, params)
    r_slot = fluid_efficacy(tau, model, params) if served > 0.0 else 0.0
    return FluidPoint(tau=tau, n_served=served, r_per_slot=r_slot, objective=served * r_slot)


# --- score-optimal threshold ------------------------------------------------


def first_order_condition(model: JointScoreModel, params: BehavioralParams, tau: float) -> float:
    """H(tau); the score-optimal threshold is its root.

    H(tau) = (1-tau) * (E[r | r_hat >= q] - E[r | r_hat = q])
             - (p0/delta_p) * (E[r | r_hat = q] - E[r])

    Strictly decreasing under monotone calibration, positive at 0 and negative
    at 1 whenever p0 > 0.
    """
    if params.delta_p == 0:
        raise ValueError("nudge has no effect; score-optimal undefined")
    er = mean_true_score(model)
    ratio = params.p0 / params.delta_p
    if tau >= 1.0:
        return -ratio * (conditional_mean_top(model) - er)
    cma = conditional_mean_above(model, tau)
    cm_at = _cond_mean_at_boundary(model, tau)
    return (1.0 - tau) * (cma - cm_at) - ratio * (cm_at - er)


_SCORE_OPT_CACHE: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def score_optimal_threshold(
    model: JointScoreModel, params: BehavioralParams, *, grid_size: int = DEFAULT_GRID
) -> float:
    """Threshold maximizing efficacy per served slot.

    Analytic models: bisection on the first-order condition to an interval of
    1e-8, clamped to 0 when H(0) <= 0 and to 1 when p0 = 0.  Empirical models:
    argmax of fluid_efficacy on a uniform grid, smallest tau on ties.
    """
    if params.delta_p == 0:
        raise ValueError("nudge has no effect; score-optimal undefined")
    per_model = _SCORE_OPT_CACHE.setdefault(model, {})
    key = (params.p0, params.delta_p, grid_size)
    if key in per_model:
        return per_model[key]
    tau = _score_optimal_uncached(model, params, grid_size)
    per_model[key] = tau
    return tau


def _score_optimal_uncached(
    model: JointScoreModel, params: BehavioralParams, grid_size: int
) -> float:
    if params.p0 == 0:
        return 1.0
    if is_empirical(model):
        taus = np.linspace(0.0, 1.0, grid_size)
        n = _corpus_size(model)
        best_tau, best_val = None, -np.inf
        for t in taus:
            t = float(t)
            if t < 1.0 and flagged_count(n, t) == 0:
                continue  # no records in the tail at this grid point
            val = fluid_efficacy(t, model, params)
            if val > best_val:  # strict improvement keeps the smallest tau on ties
                best_tau, best_val = t, val
        return best_tau
    if first_order_condition(model, params, 0.0) <= 0.0:
        return 0.0
    if first_order_condition(model, params, 1.0) >= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if first_order_condition(model, params, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _corpus_size(model: JointScoreModel) -> int:
    from . import score_model as _sm

    if isinstance(model, _sm.Analytic):
        return model.true_scores.values.size
    return model.predicted.size


def two_point_threshold(rho: float, model: JointScoreModel, params: BehavioralParams) -> float:
    """min(score-optimal, capacity-matching): the fluid-optimal threshold."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    if params.delta_p == 0:
        raise ValueError("nudge has no effect; score-optimal undefined")
    return min(
        score_optimal_threshold(model, params),
        capacity_matching_threshold(rho, params),
    )


def critical_baseline(rho: float, model: JointScoreModel, delta_p: float) -> float:
    """Smallest p0 at which the score-optimal threshold starts to bind.

    Found by bisection on the monotone difference tau_score(p0) - tau_c(p0):
    the first is strictly decreasing in p0, the second nondecreasing.
    Returns 0 if the score-optimal threshold already binds at p0 = 0 and
    1 - delta_p if it never binds.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must be in (0, 1)")
    if not 0.0 < delta_p < 1.0:
        raise ValueError("delta_p must be in (0, 1)")
    p_max = 1.0 - delta_p

    def diff(p0: float) -> float:
        params = BehavioralParams(p0, delta_p)
        return score_optimal_threshold(model, params) - capacity_matching_threshold(rho, params)

    if diff(0.0) <= 0.0:
        return 0.0
    if diff(p_max) > 0.0:
        return p_max
    lo, hi = 0.0, p_max
    while hi - lo > 1e-9:
        mid = 0.5 * (lo + hi)
        if diff(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def max_relative_gap_capacity_matching(
    model: JointScoreModel, params: BehavioralParams
) -> float:
    """Worst-case relative loss of capacity-matching across operating points.

    Equals (R(tau_score) - E[r]) / R(tau_score); attained when capacity is no
    larger than baseline demand.  At p0 = 0 the score-optimal threshold is 1
    and the right-endpoint limit E[r | r_hat = q(1)] stands in for R(1).
    """
    if params.delta_p == 0:
        raise ValueError("nudge has no effect; score-optimal undefined")
    er = mean_true_score(model)
    if params.p0 == 0:
        r_star = conditional_mean_top(model)
    else:
        r_star = fluid_efficacy(score_optimal_threshold(model, params), model, params)
    return (r_star - er) / r_star


# --- policy resolution and sweeps -------------------------------------------


def resolve_threshold(
    policy: ThresholdPolicy, rho: float, model: JointScoreModel, params: BehavioralParams
) -> float:
    """Turn a policy into a concrete tau at capacity ratio rho."""
    if isinstance(policy, Fixed):
        return policy.tau
    if isinstance(policy, CapacityMatching):
        return capacity_matching_threshold(rho, params)
    if isinstance(policy, ScoreOptimal):
        return score_optimal_threshold(model, params)
    if isinstance(policy, TwoPointOptimal):
        return two_point_threshold(rho, model, params)
    if isinstance(policy, GridOracle):
        taus = np.linspace(0.0, 1.0, policy.grid_size)
        values = [fluid_objective(float(t), model, 1.0, rho, params) for t in taus]
        return float(taus[int(np.argmax(values))])  # first max = smallest tau
    raise TypeError(f"not a ThresholdPolicy: {policy!r}")


def policy_label(policy: ThresholdPolicy) -> str:
    """Stable short name used in tables and CSV output."""
    if isinstance(policy, Fixed):
        return f"fixed({policy.tau:g})"
    if isinstance(policy, CapacityMatching):
        return "capacity_matching"
    if isinstance(policy, ScoreOptimal):
        return "score_optimal"
    if isinstance(policy, TwoPointOptimal):
        return "two_point"
    if isinstance(policy, GridOracle):
        return f"grid_oracle({policy.grid_size})"
    raise TypeError(f"not a ThresholdPolicy: {policy!r}")


def gap_curve(
    policy: ThresholdPolicy,
    *,
    axis: str,
    grid,
    model: JointScoreModel,
    params: BehavioralParams,
    rho: float | None = None,
    n: float = 1.0,
) -> list[GapPoint]:
    """Fluid suboptimality of a policy along a rho or p0 sweep.

    ``axis="rho"`` sweeps the capacity ratio with params fixed; ``axis="p0"``
    sweeps the baseline request probability at fixed rho (required).  The gap
    is W(tau*) - W(tau_policy) >= 0; the relative gap divides by W(tau*) and
    is defined as 0 at degenerate points where W(tau*) = 0.
    """
    if axis not in ("rho", "p0"):
        raise ValueError("axis must be 'rho' or 'p0'")
    if axis == "p0" and rho is None:
        raise ValueError("p0 sweeps need a fixed rho")
    points = []
    for x in grid:
        x = float(x)
        if axis == "rho":
            pt_rho, pt_params = x, params
        else:
            pt_rho, pt_params = rho, BehavioralParams(x, params.delta_p)
        m = pt_rho * n
        tau_star = two_point_threshold(pt_rho, model, pt_params)
        w_star = fluid_objective(tau_star, model, n, m, pt_params)
        tau_pol = resolve_threshold(policy, pt_rho, model, pt_params)
        w_pol = fluid_objective(tau_pol, model, n, m, pt_params)
        gap = w_star - w_pol
        if gap < -1e-7 * max(1.0, abs(w_star)):
            raise AssertionError(
                f"two-point threshold beaten at {axis}={x}: {w_pol} > {w_star}"
            )
        gap = max(gap, 0.0)
        rel = gap / w_star if w_star > 0.0 else 0.0
        points.append(
            GapPoint(
                x=x,
                tau_policy=tau_pol,
                tau_star=tau_star,
                objective_policy=w_pol,
                objective_star=w_star,
                gap=gap,
                rel_gap=rel,
            )
        )
    return points
