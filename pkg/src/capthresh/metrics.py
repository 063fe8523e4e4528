"""Predictive metrics (ROC, AUC) and the operational metric OpAUC.

AUC weights every threshold equally.  Under a capacity constraint the system
only ever operates at the two-point optimal threshold for its capacity ratio,
so algorithm selection should weight thresholds by the capacity distribution
mu actually faced in deployment:

    OpAUC(A) = integral of rho * (p0 + delta_p * TPR_A(tau*(rho)))
                              / (p0 + delta_p * (1 - tau*(rho)))  d mu(rho)

OpAUC is reported unnormalized (it is not bounded by 1) and is comparable
only across candidates at a fixed (mu, p0, delta_p).  Its ordering matches
the ordering of mu-averaged fluid objectives at each candidate's own optimal
thresholds, which is what makes it the selection criterion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .fluid import (
    BehavioralParams,
    capacity_matching_threshold,
    score_optimal_threshold,
    two_point_threshold,
)
from .score_model import JointScoreModel, mean_true_score, tpr_at

RHO_NODES = 201
TAU_GRID = 2001


@dataclass(frozen=True)
class UniformRatio:
    """Capacity ratio rho = m/n uniform on [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi):
            raise ValueError("need 0 <= lo < hi")


@dataclass(frozen=True)
class Atoms:
    """Discrete capacity-ratio law: ((rho, weight), ...)."""

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        atoms = tuple((float(r), float(w)) for r, w in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise ValueError("need at least one atom")
        if any(r <= 0 for r, _ in atoms):
            raise ValueError("capacity ratios must be positive")
        if any(w < 0 for _, w in atoms):
            raise ValueError("weights must be nonnegative")
        if abs(sum(w for _, w in atoms) - 1.0) > 1e-12:
            raise ValueError("atom weights must sum to 1")


CapacityDistribution = UniformRatio | Atoms


@dataclass(frozen=True, eq=False)
class AlgorithmCandidate:
    name: str
    model: JointScoreModel


@dataclass(frozen=True)
class CandidateReport:
    """Per-candidate metrics plus the per-rho integrand table for audit."""

    name: str
    auc: float
    opauc: float
    table: tuple[tuple[float, float, float, float, float], ...]
    # rows: (rho, weight, tau_star, tpr, integrand)


@dataclass(frozen=True)
class SelectionReport:
    candidates: tuple[CandidateReport, ...]
    winner_by_auc: str
    winner_by_opauc: str


def auc_rank(scores, labels) -> float:
    """Mann-Whitney AUC with half credit for score ties."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: need at least one positive and one negative")
    ranks = stats.rankdata(scores)  # average ranks handle ties
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _tpr(model: JointScoreModel, tau: float) -> float:
    return 0.0 if tau >= 1.0 else tpr_at(model, tau)


def auc_integral(model: JointScoreModel, grid_size: int = TAU_GRID) -> float:
    """AUC from the TPR curve: (int TPR dtau - E[r]/2) / (1 - E[r])."""
    er = mean_true_score(model)
    if not 0.0 < er < 1.0:
        raise ValueError("AUC undefined: mean true score must be in (0, 1)")
    taus = np.linspace(0.0, 1.0, grid_size)
    tpr = np.array([_tpr(model, float(t)) for t in taus])
    return float((np.trapezoid(tpr, taus) - er / 2.0) / (1.0 - er))


def roc_curve(model: JointScoreModel, grid_size: int = TAU_GRID) -> list[tuple[float, float]]:
    """(FPR, TPR) per grid threshold, from tau = 0 (at (1,1)) to tau = 1.

    FPR follows from the confusion-matrix identity: the flagged mass (1 - tau)
    splits into TPR * E[r] true positives and false positives for the rest.
    """
    er = mean_true_score(model)
    if not 0.0 < er < 1.0:
        raise ValueError("ROC undefined: mean true score must be in (0, 1)")
    out = []
    for t in np.linspace(0.0, 1.0, grid_size):
        t = float(t)
        tpr = _tpr(model, t)
        fpr = ((1.0 - t) - tpr * er) / (1.0 - er)
        out.append((min(max(fpr, 0.0), 1.0), min(max(tpr, 0.0), 1.0)))
    return out


def _integrand(model: JointScoreModel, rho: float, params: BehavioralParams) -> tuple[float, float, float]:
    tau_star = two_point_threshold(rho, model, params)
    tpr = _tpr(model, tau_star)
    value = rho * (params.p0 + params.delta_p * tpr) / (
        params.p0 + params.delta_p * (1.0 - tau_star)
    )
    return tau_star, tpr, value


def opauc(
    model: JointScoreModel,
    mu: CapacityDistribution,
    params: BehavioralParams,
    *,
    rho_nodes: int = RHO_NODES,
) -> float:
    """Capacity-weighted operational metric; each rho uses its optimal tau."""
    if params.delta_p <= 0:
        raise ValueError("nudge has no effect; OpAUC undefined")
    return sum(w * _integrand(model, rho, params)[2] for rho, w in _mu_nodes(mu, rho_nodes))


def _mu_nodes(mu: CapacityDistribution, rho_nodes: int = RHO_NODES) -> list[tuple[float, float]]:
    """Quadrature nodes (rho, weight) with weights summing to 1."""
    if isinstance(mu, Atoms):
        return list(mu.atoms)
    rhos = np.linspace(mu.lo, mu.hi, rho_nodes)
    w = np.full(rho_nodes, 1.0 / (rho_nodes - 1))
    w[0] = w[-1] = 0.5 / (rho_nodes - 1)  # trapezoid weights
    return [(float(r), float(x)) for r, x in zip(rhos, w)]


def opauc_uniform_closed_form(
    model: JointScoreModel, lo: float, hi: float, params: BehavioralParams
) -> float:
    """OpAUC for uniform capacity in the capacity-abundant regime.

    Valid only while the capacity-matching threshold binds over all of
    [lo, hi]; then OpAUC reduces to an integral of the TPR curve between
    tau_c(hi) and tau_c(lo).
    """
    if not (0.0 <= lo < hi):
        raise ValueError("need 0 <= lo < hi")
    if params.delta_p <= 0:
        raise ValueError("nudge has no effect; OpAUC undefined")
    tau_score = score_optimal_threshold(model, params)
    # tau_c decreases in rho, so the regime check binds at rho = lo
    if capacity_matching_threshold(lo, params) > tau_score:
        raise ValueError("score-optimal binds; closed form invalid")
    t_lo = capacity_matching_threshold(hi, params)
    t_hi = capacity_matching_threshold(lo, params)
    taus = np.linspace(t_lo, t_hi, TAU_GRID)
    vals = np.array([params.p0 + params.delta_p * _tpr(model, float(t)) for t in taus])
    return float(params.delta_p / (hi - lo) * np.trapezoid(vals, taus))


def select_algorithm(
    candidates, mu: CapacityDistribution, params: BehavioralParams
) -> SelectionReport:
    """Rank candidates by AUC and OpAUC; OpAUC picks the efficacy-optimal one.

    Labeled corpora use the rank AUC, everything else the integral form.
    Ties resolve to the lexicographically smallest name.
    """
    candidates = list(candidates)
    if len(candidates) < 2:
        raise ValueError("need at least two candidates")
    names = [c.name for c in candidates]
    if len(set(names)) != len(names):
        raise ValueError("candidate names must be unique")
    reports = [candidate_report(c, mu, params) for c in candidates]
    winner_auc = min(reports, key=lambda r: (-r.auc, r.name)).name
    winner_opauc = min(reports, key=lambda r: (-r.opauc, r.name)).name
    return SelectionReport(
        candidates=tuple(reports),
        winner_by_auc=winner_auc,
        winner_by_opauc=winner_opauc,
    )


def candidate_report(
    candidate: AlgorithmCandidate, mu: CapacityDistribution, params: BehavioralParams
) -> CandidateReport:
    from .score_model import EmpiricalLabeled

    model = candidate.model
    if isinstance(model, EmpiricalLabeled):
        auc = auc_rank(model.predicted, model.outcomes)
    else:
        auc = auc_integral(model)
    rows = []
    total = 0.0
    for rho, w in _mu_nodes(mu):
        tau_star, tpr, value = _integrand(model, rho, params)
        rows.append((rho, w, tau_star, tpr, value))
        total += w * value
    return CandidateReport(
        name=candidate.name, auc=auc, opauc=total, table=tuple(rows)
    )
