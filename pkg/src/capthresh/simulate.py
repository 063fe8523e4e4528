"""Stochastic funnel simulation and exact small-instance oracles.

One trial of the funnel: sample a cohort (or reuse a frozen one), flag the top
(1 - tau) fraction by predicted score, draw Bernoulli requests at
``p0 + delta_p * flagged``, then allocate ``m`` service slots.  Allocation is
a two-stage mixture: ``floor(beta1 * m)`` slots go to the highest-scoring
requesters, the remaining ``m - floor(beta1 * m)`` slots are a uniform lottery
over requesters not yet served (beta1 = 0 is pure random allocation, beta1 = 1
pure prioritization; capacity is conserved).

RNG contract: the master seed spawns one independent substream per trial
index.  Within a trial, draws are consumed in a fixed order -- cohort draws,
flag tie-break permutation, request uniforms (individual-index order), then
one prioritization tie key and one lottery key per individual.  Results are
therefore bitwise independent of worker count, and a tau-grid search reuses
the same request/allocation draws at every grid point (common random
numbers).

The exact oracles replace Monte Carlo for small instances: the expected served
count is an exact binomial convolution, and the random-allocation objective
for a frozen cohort follows from serving each requester with probability
``E[min(m / (1 + S_other), 1)]``, where S_other is the convolution of the
other n-1 request indicators.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .fluid import BehavioralParams, Fixed, ThresholdPolicy, fluid_demand, resolve_threshold
from .score_model import JointScoreModel, Population, flagged_count, sample_population

EXACT_BUDGET = 5000


@dataclass(frozen=True)
class SimConfig:
    """Operating point and Monte Carlo budget for simulate_policy."""

    n: int
    m: int
    params: BehavioralParams
    beta1: float = 0.0
    trials: int = 8000
    seed: int = 0
    binary_mode: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.m < 0:
            raise ValueError("m must be nonnegative")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0.0 <= self.beta1 <= 1.0:
            raise ValueError("beta1 must be in [0, 1]")


@dataclass(frozen=True)
class TrialOutcome:
    """Realized counts and value of a single trial."""

    served_value: float
    served_count: int
    served_flagged: int
    served_unflagged: int
    requests_total: int


@dataclass(frozen=True)
class SimEstimate:
    """Monte Carlo mean of the served value with its standard error.

    ``std_error`` is the sample standard deviation (ddof=1) over trials
    divided by sqrt(trials).  The decomposition fields are per-trial means.
    """

    mean: float
    std_error: float
    trials: int
    served_flagged_mean: float
    served_unflagged_mean: float
    requests_mean: float
    utilization_mean: float


def flag_top(population: Population, tau: float, seed=0) -> np.ndarray:
    """Boolean flags for the top (1 - tau) fraction by predicted score.

    Exactly ``n - ceil(tau * n)`` individuals are flagged; ties in predicted
    score are broken by a permutation drawn from ``seed``.
    """
    n = population.n
    k = flagged_count(n, tau)
    flags = np.zeros(n, dtype=bool)
    if k == 0:
        return flags
    rng = np.random.default_rng(seed)
    order = np.lexsort((rng.permutation(n), -population.r_hat))
    flags[order[:k]] = True
    return flags


def _allocate(
    requesters: np.ndarray,
    scores: np.ndarray,
    tie: np.ndarray,
    lottery: np.ndarray,
    m: int,
    beta1: float,
) -> np.ndarray:
    """Two-stage mixture allocation; all arrays aligned with ``requesters``."""
    count = requesters.size
    if count == 0 or m <= 0:
        return requesters[:0]
    k1 = min(int(math.floor(beta1 * m + 1e-9)), count, m)
    if k1 > 0:
        order = np.lexsort((tie, -scores))
        top = requesters[order[:k1]]
        rest_idx = order[k1:]
    else:
        top = requesters[:0]
        rest_idx = np.arange(count)
    k2 = min(m - k1, rest_idx.size)
    if k2 <= 0:
        return top
    if k2 < rest_idx.size:
        keep = rest_idx[np.argpartition(lottery[rest_idx], k2 - 1)[:k2]]
    else:
        keep = rest_idx
    return np.concatenate([top, requesters[keep]])


def allocate_mixture(
    requesters, scores, m: int, beta1: float, rng: np.random.Generator
) -> np.ndarray:
    """Serve min(m, #requesters) requesters via the beta1 mixture mechanism.

    Stage 1 gives ``floor(beta1 * m)`` slots to the highest-scoring requesters
    (ties randomized); stage 2 distributes the remaining slots uniformly at
    random among requesters not served in stage 1.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    requesters = np.asarray(requesters)
    scores = np.asarray(scores, dtype=float)
    if scores.shape != requesters.shape:
        raise ValueError("scores must align with requesters")
    tie = rng.random(requesters.size)
    lottery = rng.random(requesters.size)
    return _allocate(requesters, scores, tie, lottery, int(m), beta1)


def _run_trial(
    model: JointScoreModel,
    config: SimConfig,
    tau: float,
    frozen: tuple[Population, np.ndarray] | None,
    seed_seq: np.random.SeedSequence,
) -> TrialOutcome:
    rng = np.random.default_rng(seed_seq)
    if frozen is None:
        pop = sample_population(model, config.n, config.binary_mode, seed=rng)
        flags = flag_top(pop, tau, seed=rng)
    else:
        pop, flags = frozen
    p = config.params
    u = rng.random(config.n)
    requested = u < (p.p0 + p.delta_p * flags)
    requesters = np.flatnonzero(requested)
    tie = rng.random(config.n)
    lottery = rng.random(config.n)
    served = _allocate(
        requesters, pop.r_hat[requesters], tie[requesters], lottery[requesters],
        config.m, config.beta1,
    )
    values = pop.y if (config.binary_mode and pop.y is not None) else pop.r
    served_flagged = int(flags[served].sum())
    return TrialOutcome(
        served_value=float(values[served].sum()),
        served_count=served.size,
        served_flagged=served_flagged,
        served_unflagged=served.size - served_flagged,
        requests_total=requesters.size,
    )


def _run_range(model, config, tau, frozen, children, lo, hi):
    out = np.empty((hi - lo, 5))
    for i in range(lo, hi):
        t = _run_trial(model, config, tau, frozen, children[i])
        out[i - lo] = (
            t.served_value,
            t.served_count,
            t.served_flagged,
            t.served_unflagged,
            t.requests_total,
        )
    return out


def simulate_policy(
    config: SimConfig,
    policy: ThresholdPolicy,
    model: JointScoreModel,
    *,
    population: Population | None = None,
    workers: int = 1,
    _seed_children: list[np.random.SeedSequence] | None = None,
) -> SimEstimate:
    """Monte Carlo estimate of the served value under a threshold policy.

    With ``population`` given, the cohort (and its flag set) is frozen across
    trials and only requests/allocation are random; otherwise each trial
    resamples a cohort from the model.  Deterministic given ``config.seed``
    and independent of ``workers``.
    """
    tau = resolve_threshold(policy, config.m / config.n, model, config.params)
    frozen = None
    if population is not None:
        if population.n != config.n:
            raise ValueError("frozen population size must match config.n")
        frozen = (population, flag_top(population, tau, seed=config.seed))
    children = _seed_children
    if children is None:
        children = np.random.SeedSequence(config.seed).spawn(config.trials)
    if workers <= 1 or config.trials < 4:
        rows = _run_range(model, config, tau, frozen, children, 0, config.trials)
    else:
        bounds = np.linspace(0, config.trials, workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [
                pool.submit(_run_range, model, config, tau, frozen, children, lo, hi)
                for lo, hi in zip(bounds[:-1], bounds[1:])
                if hi > lo
            ]
            rows = np.concatenate([f.result() for f in futs])
    values = rows[:, 0]
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(config.trials)) if config.trials > 1 else 0.0
    return SimEstimate(
        mean=mean,
        std_error=se,
        trials=config.trials,
        served_flagged_mean=float(rows[:, 2].mean()),
        served_unflagged_mean=float(rows[:, 3].mean()),
        requests_mean=float(rows[:, 4].mean()),
        utilization_mean=float(rows[:, 1].mean() / config.m) if config.m > 0 else 0.0,
    )


def grid_oracle(
    config: SimConfig,
    model: JointScoreModel,
    grid_size: int,
    *,
    population: Population | None = None,
    workers: int = 1,
) -> tuple[float, SimEstimate]:
    """Exhaustive tau-grid search of the simulated objective.

    Every grid point reuses the same per-trial randomness (common random
    numbers), so differences between grid points are low-variance.  Ties pick
    the smallest tau.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    children = np.random.SeedSequence(config.seed).spawn(config.trials)
    taus = np.linspace(0.0, 1.0, grid_size)
    best_tau, best_est = None, None
    for t in taus:
        est = simulate_policy(
            config, Fixed(float(t)), model,
            population=population, workers=workers, _seed_children=children,
        )
        if best_est is None or est.mean > best_est.mean:
            best_tau, best_est = float(t), est
    return best_tau, best_est


# ---------------------------------------------------------------------------
# Exact oracles
# ---------------------------------------------------------------------------


def _binom_pmf(k: int, p: float) -> np.ndarray:
    if k == 0:
        return np.ones(1)
    return stats.binom.pmf(np.arange(k + 1), k, p)


def _request_count_pmf(k_flagged: int, k_unflagged: int, params: BehavioralParams) -> np.ndarray:
    return np.convolve(
        _binom_pmf(k_flagged, params.p0 + params.delta_p),
        _binom_pmf(k_unflagged, params.p0),
    )


def exact_expected_served(tau: float, n: int, m: int, params: BehavioralParams) -> float:
    """Exact E[min(requests, m)] by binomial convolution (n <= 5000)."""
    if n > EXACT_BUDGET:
        raise ValueError("population too large for the exact oracle; use Monte Carlo")
    k = flagged_count(n, tau)
    pmf = _request_count_pmf(k, n - k, params)
    s = np.arange(pmf.size)
    return float(np.sum(np.minimum(s, m) * pmf))


def exact_service_rates(tau: float, n: int, m: int, params: BehavioralParams) -> tuple[float, float]:
    """Exact P(served | requested) for flagged and unflagged individuals.

    Under pure random allocation a requester is served with probability
    E[min(m / (1 + S_other), 1)], where S_other is the two-binomial
    convolution of the other n-1 request indicators; the convolution differs
    by one Bernoulli term depending on the requester's own flag group.
    """
    if n > EXACT_BUDGET:
        raise ValueError("population too large for the exact oracle; use Monte Carlo")
    if m <= 0:
        return 0.0, 0.0
    k = flagged_count(n, tau)

    def served_prob(pmf: np.ndarray) -> float:
        s = np.arange(pmf.size)
        return float(np.sum(np.minimum(m / (1.0 + s), 1.0) * pmf))

    alpha_flagged = (
        served_prob(_request_count_pmf(k - 1, n - k, params)) if k > 0 else 0.0
    )
    alpha_unflagged = (
        served_prob(_request_count_pmf(k, n - k - 1, params)) if k < n else 0.0
    )
    return alpha_flagged, alpha_unflagged


def exact_objective_random(
    population: Population,
    tau: float,
    m: int,
    params: BehavioralParams,
    *,
    flag_seed: int = 0,
) -> float:
    """Exact served value for a frozen cohort under pure random allocation.

    Sums r_i * p_i * E[min(m / (1 + S_other), 1)] over individuals via the
    per-group service rates of :func:`exact_service_rates`.  beta1 = 0 only.
    """
    n = population.n
    if n > EXACT_BUDGET:
        raise ValueError("population too large for the exact oracle; use Monte Carlo")
    if m <= 0:
        return 0.0
    flags = flag_top(population, tau, seed=flag_seed)
    alpha_flagged, alpha_unflagged = exact_service_rates(tau, n, m, params)
    p1 = params.p0 + params.delta_p
    total = p1 * alpha_flagged * float(population.r[flags].sum())
    total += params.p0 * alpha_unflagged * float(population.r[~flags].sum())
    return total


def chernoff_demand_bound(tau: float, n: int, m: int, params: BehavioralParams) -> float:
    """Chernoff bound on |fluid_served - exact_expected_served| at tau.

    Oversubscribed side (demand above capacity): m * exp(-delta^2 mu / 2);
    undersubscribed side: n * exp(-delta^2 / (2 + delta) mu), with mu the
    expected request count and delta the relative distance to capacity.
    """
    mu = fluid_demand(tau, n, params)
    if mu <= 0:
        return 0.0
    if m < mu:
        delta = (mu - m) / mu
        return m * math.exp(-(delta**2) * mu / 2.0)
    if m > mu:
        delta = (m - mu) / mu
        return n * math.exp(-(delta**2) / (2.0 + delta) * mu)
    return float(m)
