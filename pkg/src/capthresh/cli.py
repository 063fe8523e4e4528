"""Command-line entry point: one scenario file drives every subcommand.

Subcommands:

* ``threshold`` -- capacity-matching, score-optimal, and two-point thresholds
  plus the critical baseline and the binding regime at the operating point.
* ``sweep``     -- policy comparison table along the scenario's sweep axis,
  written as CSV and a three-panel SVG.
* ``simulate``  -- Monte Carlo estimates for every policy x beta1 pair.
* ``opauc``     -- AUC vs OpAUC selection report over the capacity law mu.
* ``validate``  -- fluid-vs-exact/MC convergence table across cohort sizes.
* ``oracle``    -- exhaustive tau-grid search of the simulated objective.

Exit codes: 0 success, 1 scenario/validation error, 2 runtime error,
64 usage.  Stdout is line-oriented ``key=value``; floats print with full
round-trip precision so reruns can be compared byte for byte.  All files are
written via write-then-rename, so failures leave no partial outputs.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import fluid, metrics, scenario as sio, simulate as sim
from .fluid import BehavioralParams
from .scenario import ScenarioError, SweepRow, SweepTable


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _emit(**kv) -> None:
    print(" ".join(f"{k}={_fmt(v)}" for k, v in kv.items()))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(64)


def _build_parser() -> _Parser:
    parser = _Parser(prog="capthresh", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("threshold", "sweep", "simulate", "opauc", "validate", "oracle"):
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True, help="scenario JSON path")
        p.add_argument("--seed", type=int, help="override scenario seed")
        p.add_argument("--trials", type=int, help="override Monte Carlo trials")
        p.add_argument("--beta1", type=float, help="override allocation mix")
        p.add_argument("--workers", type=int, default=1, help="worker processes")
        p.add_argument("--out", help="override output prefix")
    return parser


def _apply_overrides(scn: sio.Scenario, args) -> sio.Scenario:
    if args.seed is not None:
        scn.doc["seed"] = args.seed
    if args.trials is not None:
        if args.trials < 1:
            raise ScenarioError("scenario.trials: must be >= 1")
        scn.doc["trials"] = args.trials
    if args.beta1 is not None:
        if not 0.0 <= args.beta1 <= 1.0:
            raise ScenarioError("beta1[0]: must be a float in [0, 1]")
        scn.doc["beta1"] = [args.beta1]
    if args.out is not None:
        scn.doc["output_prefix"] = args.out
    return scn


def _require_point(scn: sio.Scenario) -> tuple[int, int]:
    if scn.m is None:
        raise ScenarioError("population.m: this subcommand needs a single operating point")
    return scn.n, scn.m


def _require_prefix(scn: sio.Scenario) -> str:
    prefix = scn.output_prefix
    if prefix is None:
        raise ScenarioError("scenario.output_prefix: required (or pass --out)")
    return prefix


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_threshold(scn: sio.Scenario, args) -> int:
    n, m = _require_point(scn)
    rho = m / n
    model = scn.build_model()
    params = scn.behavioral
    tau_c = fluid.capacity_matching_threshold(rho, params)
    tau_score = fluid.score_optimal_threshold(model, params)
    tau_star = min(tau_c, tau_score)
    regime = "cannibalization-bound" if tau_score < tau_c else "utilization-bound"
    if 0.0 < rho < 1.0 and 0.0 < params.delta_p < 1.0:
        p0_critical = fluid.critical_baseline(rho, model, params.delta_p)
    else:
        p0_critical = float("nan")
    _emit(rho=rho, tau_c=tau_c, tau_score=tau_score, tau_star=tau_star,
          p0_critical=p0_critical, regime=regime)
    return 0


def _sim_estimate_row(scn, model, policy, n, m, params, workers):
    cfg = sim.SimConfig(
        n=n, m=m, params=params, beta1=scn.beta1[0],
        trials=scn.trials, seed=scn.seed,
    )
    return sim.simulate_policy(cfg, policy, model, workers=workers)


def _cmd_sweep(scn: sio.Scenario, args) -> int:
    sweep = scn.sweep
    if sweep is None:
        raise ScenarioError("sweep: this subcommand needs a sweep block")
    prefix = _require_prefix(scn)
    model = scn.build_model()
    params = scn.behavioral
    grid = np.linspace(sweep["lo"], sweep["hi"], sweep["points"])
    axis = sweep["axis"]
    rho = scn.m / scn.n if axis == "p0" else None
    rows = []
    for policy in scn.policies:
        label = fluid.policy_label(policy)
        points = fluid.gap_curve(
            policy, axis=axis, grid=grid, model=model, params=params, rho=rho, n=scn.n
        )
        for pt in points:
            sim_mean = sim_se = None
            if sweep["simulate"]:
                if axis == "rho":
                    n, m, pt_params = scn.n, int(round(pt.x * scn.n)), params
                else:
                    n, m, pt_params = scn.n, scn.m, BehavioralParams(pt.x, params.delta_p)
                est = _sim_estimate_row(scn, model, policy, n, m, pt_params, args.workers)
                sim_mean, sim_se = est.mean, est.std_error
            rows.append(
                SweepRow(
                    axis_value=pt.x, policy=label, tau=pt.tau_policy,
                    fluid_w=pt.objective_policy, sim_mean=sim_mean, sim_se=sim_se,
                    gap=pt.gap, rel_gap=pt.rel_gap,
                )
            )
    table = SweepTable(rows=tuple(rows))
    csv_path = prefix + "_sweep.csv"
    svg_path = prefix + "_sweep.svg"
    sio.write_sweep_csv(table, csv_path)
    sio.render_sweep_svg(table, axis, svg_path)
    _emit(rows=len(table.rows), csv=csv_path, svg=svg_path)
    return 0


def _cmd_simulate(scn: sio.Scenario, args) -> int:
    n, m = _require_point(scn)
    model = scn.build_model()
    params = scn.behavioral
    for policy in scn.policies:
        tau = fluid.resolve_threshold(policy, m / n, model, params)
        for b1 in scn.beta1:
            cfg = sim.SimConfig(
                n=n, m=m, params=params, beta1=b1, trials=scn.trials, seed=scn.seed
            )
            est = sim.simulate_policy(cfg, policy, model, workers=args.workers)
            _emit(
                policy=fluid.policy_label(policy), beta1=b1, tau=tau,
                mean=est.mean, se=est.std_error, trials=est.trials,
                served_flagged=est.served_flagged_mean,
                served_unflagged=est.served_unflagged_mean,
                requests=est.requests_mean, utilization=est.utilization_mean,
            )
    return 0


def _cmd_opauc(scn: sio.Scenario, args) -> int:
    mu = scn.mu
    if mu is None:
        raise ScenarioError("mu: this subcommand needs a capacity distribution")
    prefix = _require_prefix(scn)
    params = scn.behavioral
    cands = [metrics.AlgorithmCandidate(name, model) for name, model in scn.build_candidates()]
    if len(cands) >= 2:
        report = metrics.select_algorithm(cands, mu, params)
    else:
        only = metrics.candidate_report(cands[0], mu, params)
        report = metrics.SelectionReport(
            candidates=(only,), winner_by_auc=only.name, winner_by_opauc=only.name
        )
    csv_path, json_path = sio.write_selection_report(report, prefix)
    for cand in report.candidates:
        _emit(candidate=cand.name, auc=cand.auc, opauc=cand.opauc)
    _emit(winner_by_auc=report.winner_by_auc, winner_by_opauc=report.winner_by_opauc,
          csv=str(csv_path), json=str(json_path))
    return 0


def _cmd_validate(scn: sio.Scenario, args) -> int:
    n0, m0 = _require_point(scn)
    prefix = _require_prefix(scn)
    model = scn.build_model()
    params = scn.behavioral
    rho = m0 / n0
    vspec = scn.validate_spec
    lines = ["n,method,fluid_w,estimate,abs_error,rel_error"]
    last_rel = float("nan")
    for nk in vspec["n_values"]:
        mk = int(round(rho * nk))
        tau_star = fluid.two_point_threshold(mk / nk, model, params)
        fluid_w = fluid.fluid_objective(tau_star, model, nk, mk, params)
        if nk <= sim.EXACT_BUDGET:
            method = "exact"
            seeds = np.random.SeedSequence((scn.seed, nk)).spawn(vspec["populations"])
            vals = [
                sim.exact_objective_random(
                    sim.sample_population(model, nk, seed=s), tau_star, mk, params,
                    flag_seed=scn.seed,
                )
                for s in seeds
            ]
            est = float(np.mean(vals))
        else:
            method = "mc"
            cfg = sim.SimConfig(
                n=nk, m=mk, params=params, trials=scn.trials, seed=scn.seed
            )
            est = sim.simulate_policy(
                cfg, fluid.Fixed(tau_star), model, workers=args.workers
            ).mean
        abs_err = abs(fluid_w - est)
        rel_err = abs_err / fluid_w if fluid_w else 0.0
        last_rel = rel_err
        lines.append(
            ",".join(
                (str(nk), method) + tuple(format(v, ".9g") for v in (fluid_w, est, abs_err, rel_err))
            )
        )
    out_path = prefix + "_validate.csv"
    sio._write_atomic(sio.Path(out_path), "\n".join(lines) + "\n")
    _emit(csv=out_path, rel_error_final=last_rel)
    return 0


def _cmd_oracle(scn: sio.Scenario, args) -> int:
    n, m = _require_point(scn)
    model = scn.build_model()
    cfg = sim.SimConfig(
        n=n, m=m, params=scn.behavioral, beta1=scn.beta1[0],
        trials=scn.trials, seed=scn.seed,
    )
    tau_best, est = sim.grid_oracle(cfg, model, scn.oracle_grid, workers=args.workers)
    _emit(tau_best=tau_best, mean=est.mean, se=est.std_error,
          trials=est.trials, grid=scn.oracle_grid)
    return 0


_COMMANDS = {
    "threshold": _cmd_threshold,
    "sweep": _cmd_sweep,
    "simulate": _cmd_simulate,
    "opauc": _cmd_opauc,
    "validate": _cmd_validate,
    "oracle": _cmd_oracle,
}


def execute(argv) -> int:
    """Parse argv, run the subcommand, and map failures to exit codes."""
    args = _build_parser().parse_args(argv)
    try:
        scn = _apply_overrides(sio.load_scenario(args.scenario), args)
        return _COMMANDS[args.command](scn, args)
    except ScenarioError as e:
        print(f"capthresh: scenario error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"capthresh: error: {e}", file=sys.stderr)
        return 2


def main(argv=None) -> int:
    return execute(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
