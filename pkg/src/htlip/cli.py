"""Command-line front end.

Subcommands: simulate (one closed-loop run), compare (per-tick QP control
against a fixed gain certified for a motionless surface, on identical
scenarios and seeds), montecarlo (randomized robustness trials), sweep
(stability/feasibility rasters over parameter grids), and qp-debug (dump a
single gain QP with its solution and KKT residuals).

Exit codes: 0 on a bounded run, 2 when a run diverged or had to fall back
on an infeasible QP, 64 for configuration errors, 65 for validation errors.
All outputs land inside the directory given with --out.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from ._backend import backend_name
from .config import (apply_overrides, build_mc_spec, build_scenario, check_keys,
                     load_toml, parse_grid)
from .controller import build_qp, kkt_residuals, solve_qp
from .dynamics import ModelParams
from .errors import ConfigError, ValidationError
from .simulate import (monte_carlo, run_scenario, write_steps_json,
                       write_summary_json, write_trajectory_csv)
from .stability import GainK, sweep_stability_region, write_sweep_csv
from .surface import estimate_fbar

EXIT_OK = 0
EXIT_DEGRADED = 2
EXIT_CONFIG = 64
EXIT_VALIDATION = 65


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="htlip",
                                description="Footstep-controlled pendulum "
                                            "locomotion on a moving surface")
    p.add_argument("--version", action="version", version=f"htlip {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="scenario TOML file")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--override", action="append", default=[],
                        metavar="K=V", help="override a config key (repeatable)")
    common.add_argument("--seed", type=int, default=None, help="override sim seed")
    sub.add_parser("simulate", parents=[common],
                   help="run one closed-loop scenario")
    cmp_p = sub.add_parser("compare", parents=[common],
                           help="proposed controller vs fixed static-gain baseline")
    cmp_p.add_argument("--trials", type=int, default=None,
                       help="paired Monte Carlo trials (default: single run)")
    mc_p = sub.add_parser("montecarlo", parents=[common],
                          help="randomized robustness trials")
    mc_p.add_argument("--trials", type=int, default=None)
    sw_p = sub.add_parser("sweep", parents=[common],
                          help="stability/feasibility sweep over a grid")
    sw_p.add_argument("--grid", default=None,
                      help="axes as name=lo:hi:n, e.g. fbar=10:60:26,dtau=0.1:0.5:21")
    sub.add_parser("qp-debug", parents=[common],
                   help="dump one gain QP instance with its solution")
    return p


def _load(args):
    raw = load_toml(args.scenario)
    check_keys(raw)
    apply_overrides(raw, args.override)
    if args.seed is not None:
        raw.setdefault("sim", {})["seed"] = args.seed
    base_dir = os.path.dirname(os.path.abspath(args.scenario))
    scn = build_scenario(raw, base_dir)
    return raw, scn


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def cmd_simulate(args) -> int:
    _, scn = _load(args)
    out = _outdir(args)
    result = run_scenario(scn)
    write_trajectory_csv(os.path.join(out, "trajectory.csv"), result)
    write_steps_json(os.path.join(out, "steps.json"), result)
    summary = result.summary()
    summary["backend"] = backend_name()
    write_summary_json(os.path.join(out, "summary.json"), summary)
    print(f"simulate: {len(result.steps)} steps, max |e| = {result.max_err:.4g}, "
          f"final |e| = {summary['final_error_norm']:.4g}, "
          f"fallbacks = {result.n_fallback}, diverged = {result.diverged}")
    if result.diverged or result.n_fallback > 0:
        return EXIT_DEGRADED
    return EXIT_OK


def _static_baseline_gain(scn) -> GainK:
    """Fixed gain certified for a motionless surface: QP optimum at f0."""
    qp = build_qp(scn.params.f0, scn.params.dtau, (0.0, 0.0),
                  scn.reference.u_xr, scn.params, scn.qp_eps)
    sol = solve_qp(qp, want_multipliers=False)
    if sol.status != "optimal":
        raise ValidationError("static baseline QP unexpectedly infeasible")
    return sol.gain


def _drift(steps) -> float:
    if not steps:
        return 0.0
    return float(np.mean([s.e_minus[0] for s in steps]))


def cmd_compare(args) -> int:
    from dataclasses import replace

    raw, scn = _load(args)
    out = _outdir(args)
    base_gain = _static_baseline_gain(scn)
    baseline = replace(scn, gain_mode="fixed", fixed_gain=base_gain)

    trials = args.trials
    if trials is None and "montecarlo" in raw:
        trials = build_mc_spec(raw)[0]

    if trials:
        n, spec, success = build_mc_spec(raw)
        res_p = monte_carlo(scn, trials, spec, success)
        res_b = monte_carlo(baseline, trials, spec, success)
        prop_max = [t["max_error_norm"] for t in res_p["trials"]]
        base_max = [t["max_error_norm"] for t in res_b["trials"]]
        wins = sum(b > p for p, b in zip(prop_max, base_max))
        metrics = {
            "mode": "paired_montecarlo", "trials": trials,
            "proposed": {k: v for k, v in res_p.items() if k != "trials"},
            "baseline": {k: v for k, v in res_b.items() if k != "trials"},
            "proposed_max_error": max(prop_max),
            "baseline_max_error": max(base_max),
            "proposed_mean_drift": float(np.mean(
                [abs(t["mean_position_drift"]) for t in res_p["trials"]])),
            "baseline_mean_drift": float(np.mean(
                [abs(t["mean_position_drift"]) for t in res_b["trials"]])),
            "proposed_wins": wins,
        }
    else:
        res_p = run_scenario(scn)
        res_b = run_scenario(baseline)
        write_steps_json(os.path.join(out, "proposed_steps.json"), res_p)
        write_steps_json(os.path.join(out, "baseline_steps.json"), res_b)
        metrics = {
            "mode": "single_run",
            "proposed": {**res_p.summary(), "mean_position_drift": _drift(res_p.steps)},
            "baseline": {**res_b.summary(), "mean_position_drift": _drift(res_b.steps)},
            "proposed_max_error": res_p.max_err,
            "baseline_max_error": res_b.max_err,
        }
        if res_p.diverged or res_p.n_fallback > 0:
            metrics["proposed_degraded"] = True
    metrics["baseline_gain"] = [base_gain.k1, base_gain.k2]
    gap = metrics["baseline_max_error"] - metrics["proposed_max_error"]
    metrics["winner"] = ("tie" if abs(gap) <= 1e-12
                         else "proposed" if gap > 0 else "baseline")
    write_summary_json(os.path.join(out, "compare.json"), metrics)
    print(f"compare: proposed max |e| = {metrics['proposed_max_error']:.4g}, "
          f"baseline max |e| = {metrics['baseline_max_error']:.4g} "
          f"-> winner: {metrics['winner']}")
    if metrics.get("proposed_degraded"):
        return EXIT_DEGRADED
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    raw, scn = _load(args)
    out = _outdir(args)
    trials, spec, success = build_mc_spec(raw)
    if args.trials is not None:
        trials = args.trials
    summary = monte_carlo(scn, trials, spec, success)
    summary["backend"] = backend_name()
    write_summary_json(os.path.join(out, "montecarlo.json"), summary)
    print(f"montecarlo: {trials} trials, success rate {summary['success_rate']:.2%}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    raw, scn = _load(args)
    out = _outdir(args)
    sweep_tab = raw.get("sweep", {})
    grid_spec = args.grid or sweep_tab.get("grid")
    if not grid_spec:
        raise ConfigError("sweep needs --grid or a [sweep] grid entry")
    grids = parse_grid(grid_spec)
    for axis in ("k1", "k2"):
        if axis not in grids and axis in sweep_tab:
            grids[axis] = parse_grid(f"{axis}={sweep_tab[axis]}")[axis]
    k1 = grids.get("k1", list(np.linspace(0.0, 2.0, 41)))
    k2 = grids.get("k2", list(np.linspace(-0.5, 0.5, 41)))

    if "z0" in grids:
        horizon = float(sweep_tab.get("horizon_s", 60.0))
        dtaus = grids.get("dtau", [scn.params.dtau])
        rows, n_feasible = [], 0
        for z0 in grids["z0"]:
            est = estimate_fbar(scn.profile, 0.0, horizon, z0, scn.params.g,
                                scn.fbar_margin)
            for dtau in dtaus:
                params = ModelParams(z0=z0, g=scn.params.g, mu=scn.params.mu,
                                     u_min=scn.params.u_min, u_max=scn.params.u_max,
                                     dtau=dtau,
                                     step_bound_mode=scn.params.step_bound_mode)
                qp = build_qp(est.fbar, dtau, (0.0, 0.0), scn.reference.u_xr,
                              params, scn.qp_eps)
                sol = solve_qp(qp, want_multipliers=False)
                feasible = sol.status == "optimal"
                n_feasible += feasible
                rows.append({"z0": z0, "dtau": dtau, "fbar": est.fbar,
                             "feasible": feasible,
                             "k1": sol.gain.k1 if feasible else None,
                             "k2": sol.gain.k2 if feasible else None})
        payload = {"mode": "feasibility", "cells": rows,
                   "n_cells": len(rows), "n_feasible": n_feasible,
                   "all_feasible": n_feasible == len(rows)}
        write_summary_json(os.path.join(out, "sweep_summary.json"), payload)
        print(f"sweep: {n_feasible}/{len(rows)} grid cells feasible")
        return EXIT_OK

    fbars = grids.get("fbar", [scn.params.f0])
    dtaus = grids.get("dtau", [scn.params.dtau])
    cells = sweep_stability_region(fbars, dtaus, k1, k2)
    write_sweep_csv(os.path.join(out, "sweep.csv"), cells)
    nonempty = sum(c["nonempty"] for c in cells)
    payload = {"mode": "stability_raster", "n_cells": len(cells),
               "n_nonempty": nonempty, "all_nonempty": nonempty == len(cells),
               "cells": [{"fbar": c["fbar"], "dtau": c["dtau"], "xi": c["xi"],
                          "nonempty": c["nonempty"]} for c in cells]}
    write_summary_json(os.path.join(out, "sweep_summary.json"), payload)
    print(f"sweep: {nonempty}/{len(cells)} (fbar, dtau) cells have a "
          f"non-empty certified gain set")
    return EXIT_OK


def cmd_qp_debug(args) -> int:
    _, scn = _load(args)
    out = _outdir(args)
    est = estimate_fbar(scn.profile, 0.0, scn.params.dtau, scn.params.z0,
                        scn.params.g, scn.fbar_margin)
    qp = build_qp(est.fbar, scn.params.dtau, scn.e0, scn.reference.u_xr,
                  scn.params, scn.qp_eps)
    sol = solve_qp(qp, want_multipliers=True)
    payload = qp.to_dict()
    payload.update(sol.to_dict())
    if sol.status == "optimal":
        payload["kkt"] = kkt_residuals(qp, sol)
    write_summary_json(os.path.join(out, "qp_debug.json"), payload)
    print(f"qp-debug: status {sol.status}, K = [{sol.gain.k1:.6g}, "
          f"{sol.gain.k2:.6g}], cost = {sol.cost:.6g}")
    return EXIT_OK


_COMMANDS = {"simulate": cmd_simulate, "compare": cmd_compare,
             "montecarlo": cmd_montecarlo, "sweep": cmd_sweep,
             "qp-debug": cmd_qp_debug}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
