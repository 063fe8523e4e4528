"""Walk through the two-point threshold rule on a worked example.

A cohort of 100 individuals requests service with baseline probability 0.1;
flagging raises an individual's request probability to 0.6; only 20 requests
can be served.  True scores are uniform on [0, 1] and the predictor ranks
them perfectly.
"""

import numpy as np

import capthresh as ct

model = ct.Analytic(ct.Uniform01(), ct.Perfect())
params = ct.BehavioralParams(p0=0.1, delta_p=0.5)
n, m = 100, 20

print("Four candidate thresholds, demand vs. capacity:")
for tau in (0.9, 0.8, 0.7, 0.6):
    demand = n * (params.p0 + params.delta_p * (1 - tau))
    served = ct.fluid_served(tau, n, m, params)
    eff = ct.fluid_efficacy(tau, model, params)
    w = ct.fluid_objective(tau, model, n, m, params)
    print(
        f"  tau={tau:.1f}: demand {demand:5.1f} -> served {served:5.1f}, "
        f"value per slot {eff:.3f}, total {w:.2f}"
    )
print("Flagging the top 20% fills capacity exactly, but the top 30% does")
print("better: baseline requests crowd out less of the flagged value.\n")

tau_c = ct.capacity_matching_threshold(m / n, params)
tau_s = ct.score_optimal_threshold(model, params)
tau_star = ct.two_point_threshold(m / n, model, params)
print(f"capacity-matching threshold: {tau_c:.6f}")
print(f"score-optimal threshold:     {tau_s:.6f}")
print(f"two-point optimal:           {tau_star:.6f}  (the smaller of the two)\n")

print("Which threshold binds depends on the capacity ratio:")
transition = params.p0 + params.delta_p * (1 - tau_s)
for rho in (0.05, 0.15, 0.2, transition, 0.3, 0.45, 0.62):
    t = ct.two_point_threshold(rho, model, params)
    binding = "score-optimal" if t < ct.capacity_matching_threshold(rho, params) - 1e-12 else "capacity-matching"
    print(f"  rho={rho:0.4f}: tau*={t:.4f}  ({binding})")
print(f"The regimes meet at rho = p0 + delta_p (1 - tau_s) = {transition:.5f}.\n")

print("And on the baseline request probability, at rho = 0.2:")
p0_bar = ct.critical_baseline(0.2, model, 0.5)
print(f"critical baseline p0_bar = {p0_bar:.6f}")
for p0 in np.linspace(0.0, 0.2, 6):
    pr = ct.BehavioralParams(float(p0), 0.5)
    t = ct.two_point_threshold(0.2, model, pr)
    side = "capacity fills first" if p0 <= p0_bar else "cannibalization binds"
    print(f"  p0={p0:.2f}: tau*={t:.4f}  ({side})")
