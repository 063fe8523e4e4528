"""Does the two-point rule survive score-based prioritization?

The two-point threshold is derived under random allocation.  Here providers
reserve a share beta1 of slots for the highest-scoring requesters and raffle
the rest.  We compare the two-point rule and two fixed thresholds against an
exhaustive tau-grid search at each beta1 (all runs share request/allocation
randomness, so the comparisons are low-variance).
"""

import capthresh as ct

params = ct.BehavioralParams(p0=0.1, delta_p=0.5)
model = ct.Analytic(
    ct.BetaMixture(((0.7, 2, 10), (0.3, 8, 2))), ct.GaussianNoiseClipped(0.1)
)
n, m, trials = 1000, 200, 800

tau_two_point = ct.two_point_threshold(m / n, model, params)
tau_cap = ct.capacity_matching_threshold(m / n, params)
print(f"two-point threshold (random-allocation theory): {tau_two_point:.4f}")
print(f"capacity-matching threshold:                    {tau_cap:.4f}\n")

header = f"{'beta1':>6} {'oracle tau':>10} {'oracle':>8} | " + " | ".join(
    f"{name:>16}" for name in ("two_point", "fixed 0.6", f"fixed {tau_cap:.1f}")
)
print(header)
for beta1 in (0.0, 0.25, 0.5, 0.75, 1.0):
    cfg = ct.SimConfig(n=n, m=m, params=params, beta1=beta1, trials=trials, seed=11)
    tau_best, best = ct.grid_oracle(cfg, model, 21)
    cells = []
    for tau in (tau_two_point, 0.6, tau_cap):
        est = ct.simulate_policy(cfg, ct.Fixed(tau), model)
        gap = (best.mean - est.mean) / best.mean
        cells.append(f"{est.mean:8.1f} ({gap:+5.1%})")
    print(f"{beta1:6.2f} {tau_best:10.2f} {best.mean:8.1f} | " + " | ".join(cells))

print(
    "\nThe two-point rule tracks the oracle until prioritization is nearly"
    "\ntotal; the fixed thresholds each fall over at one extreme -- broad"
    "\nflagging wastes slots under a raffle, narrow flagging starves a"
    "\nprioritizing provider of candidates."
)
