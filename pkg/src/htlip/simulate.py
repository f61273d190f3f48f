"""Closed-loop hybrid simulation and Monte Carlo robustness evaluation.

A scenario alternates continuous-phase integration of the pendulum with
foot-switch resets commanded by the stepping controller.  The stiffness
bound estimate is refreshed every control tick (5 ms by default); in
per-tick mode the gain QP is also re-solved every tick for planning, and
in both QP modes the gain executed at a switch comes from a solve at that
instant with the exact pre-switch error and the duration of the phase it
will act over, so the logged certificate matches the executed step map.

Velocity impulses model sudden pushes, sway acceleration models unmodeled
horizontal surface motion, and uniform noise on the sampled surface
acceleration models estimator error in the causal (unknown-motion) mode.
Runs are deterministic given the scenario, including its seed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ._backend import kernels
from .controller import (FootstepController, ReferenceGait,
                         QP_STATUS_INFEASIBLE, QP_STATUS_OPTIMAL)
from .dynamics import HtLipState, ModelParams, reset_map, sample_stiffness
from .errors import ValidationError
from .stability import GainK, certify_gain
from .surface import MotionProfile

FBAR_MODES = ("oracle_horizon", "causal_window")
GAIN_MODES = ("per_tick", "per_step", "fixed")
DISTURBANCE_KINDS = ("velocity_impulse", "fbar_noise", "sway_accel")

#: Lowest stiffness bound the controller will act on; estimates below this
#: (possible under extreme estimator noise) are clamped and counted.
FBAR_FLOOR = 1e-2


@dataclass(frozen=True)
class Disturbance:
    kind: str
    time: float
    magnitude: float
    axis: str = "x"

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise ValidationError(f"unknown disturbance kind '{self.kind}'")
        if self.time < 0:
            raise ValidationError("disturbance time must be nonnegative")


@dataclass
class Scenario:
    """Everything needed to reproduce one closed-loop run."""

    profile: MotionProfile
    params: ModelParams
    reference: ReferenceGait
    duration: float
    e0: tuple[float, float] = (0.0, 0.0)
    disturbances: tuple[Disturbance, ...] = ()
    fbar_mode: str = "oracle_horizon"
    gain_mode: str = "per_tick"
    fixed_gain: Optional[GainK] = None
    seed: int = 0
    tick: float = 5e-3
    dt: float = 1e-3
    fbar_margin: float = 0.0
    fbar_window: Optional[float] = None  # defaults to one gait cycle
    fbar_noise: float = 0.0
    dtau_jitter: float = 0.0
    qp_eps: float = 1e-6
    success_err: float = 0.5
    divergence_err: float = 10.0
    collect_samples: bool = True
    axis: str = "x"

    def validate(self) -> None:
        if self.duration <= 0:
            raise ValidationError("duration must be positive")
        if self.axis not in ("x", "y"):
            raise ValidationError("axis must be 'x' or 'y'")
        if self.fbar_mode not in FBAR_MODES:
            raise ValidationError(f"unknown fbar_mode '{self.fbar_mode}'")
        if self.gain_mode not in GAIN_MODES:
            raise ValidationError(f"unknown gain_mode '{self.gain_mode}'")
        if self.gain_mode == "fixed" and self.fixed_gain is None:
            raise ValidationError("gain_mode 'fixed' needs fixed_gain")
        if self.tick <= 0 or self.dt <= 0 or self.tick < self.dt:
            raise ValidationError("need tick >= dt > 0")
        if abs(self.tick / self.dt - round(self.tick / self.dt)) > 1e-9:
            raise ValidationError("tick must be an integer multiple of dt")
        if not (math.isfinite(self.e0[0]) and math.isfinite(self.e0[1])):
            raise ValidationError("initial error must be finite")
        if not 0.0 <= self.dtau_jitter < 0.5:
            raise ValidationError("dtau_jitter must be in [0, 0.5)")
        if self.reference.dtau != self.params.dtau:
            raise ValidationError("reference and params disagree on dtau")


@dataclass
class StepLog:
    """Record of one foot switch and the phase the executed gain acts over."""

    n: int
    tau_minus: float
    tau_plus: float
    x_minus: tuple[float, float]
    x_plus: tuple[float, float]
    e_minus: tuple[float, float]
    u_xd: float
    gain: GainK
    a_dn: float
    fbar: float
    qp_status: str
    ratio: Optional[float] = None
    disturbed: bool = False
    pushed: bool = False

    def to_dict(self) -> dict:
        return {
            "n": self.n, "tau_minus": self.tau_minus, "tau_plus": self.tau_plus,
            "x_minus": list(self.x_minus), "x_plus": list(self.x_plus),
            "e_minus": list(self.e_minus), "u_xd": self.u_xd,
            "gain": [self.gain.k1, self.gain.k2], "a_dn": self.a_dn,
            "fbar": self.fbar, "qp_status": self.qp_status,
            "ratio": self.ratio, "disturbed": self.disturbed,
            "pushed": self.pushed,
        }


SAMPLE_COLUMNS = ("t", "x", "xdot", "x_ref", "e", "u_xd", "k1", "k2",
                  "a_dn", "fbar", "z_s", "zdd_s")


@dataclass
class SimResult:
    steps: list[StepLog]
    samples: dict[str, np.ndarray]
    final_error: tuple[float, float]
    max_err: float
    diverged: bool
    n_fallback: int
    n_infeasible: int
    n_fbar_clamped: int
    max_ratio: Optional[float]

    def summary(self) -> dict:
        ratios = [s.ratio for s in self.steps
                  if s.ratio is not None and not s.disturbed
                  and s.qp_status == QP_STATUS_OPTIMAL]
        return {
            "n_steps": len(self.steps),
            "final_error": list(self.final_error),
            "final_error_norm": err_norm(self.final_error),
            "max_error_norm": self.max_err,
            "diverged": self.diverged,
            "n_fallback": self.n_fallback,
            "n_infeasible": self.n_infeasible,
            "max_contraction_ratio": self.max_ratio,
            "mean_contraction_ratio": float(np.mean(ratios)) if ratios else None,
        }


def err_norm(e) -> float:
    """Infinity norm of the error pair [e, edot]."""
    return max(abs(e[0]), abs(e[1]))


def inject_push(state: HtLipState, d: Disturbance) -> HtLipState:
    """Apply a velocity impulse: position untouched, velocity shifted."""
    if d.kind != "velocity_impulse":
        raise ValidationError("inject_push expects a velocity_impulse disturbance")
    return HtLipState(state.x, state.xdot + d.magnitude)


def _phase_durations(scn: Scenario, rng) -> list[float]:
    base = scn.params.dtau
    durations = []
    total = 0.0
    while total < scn.duration - 1e-9:
        dt_k = base
        if scn.dtau_jitter > 0:
            dt_k = base * (1.0 + rng.uniform(-scn.dtau_jitter, scn.dtau_jitter))
        durations.append(dt_k)
        total += dt_k
    if not durations:
        durations.append(base)
    return durations


def _flow_reference(ref: ReferenceGait, state: tuple[float, float], s: float):
    """Constant-stiffness reference flow from an arbitrary anchor state."""
    sq = math.sqrt(ref.f0)
    c = math.cosh(sq * s)
    sh = math.sinh(sq * s)
    return (c * state[0] + sh / sq * state[1],
            sq * sh * state[0] + c * state[1])


class _FbarTracker:
    """Per-tick stiffness-bound estimates for both estimator modes.

    Oracle mode knows the motion: the bound over any window is read off
    per-phase suffix maxima of the sampled stiffness.  Causal mode keeps a
    ring of past tick samples (noisy when estimator noise is active) whose
    maximum plus margin is the bound.
    """

    def __init__(self, scn: Scenario, phase_f, phase_sup, rng):
        self.scn = scn
        self.phase_sup = phase_sup
        self.suffix = [np.maximum.accumulate(f[::-1])[::-1] for f, _, _ in phase_f]
        self.rng = rng
        window = scn.fbar_window if scn.fbar_window is not None else scn.params.dtau
        self.ring_len = max(1, int(round(window / scn.tick)) + 1)
        self.ring: list[float] = []
        self.noise_amp = scn.fbar_noise + sum(
            d.magnitude for d in scn.disturbances if d.kind == "fbar_noise")
        self.n_clamped = 0
        self.oracle = scn.fbar_mode == "oracle_horizon"

    def _clamp(self, est: float) -> float:
        if est < FBAR_FLOOR:
            self.n_clamped += 1
            return FBAR_FLOOR
        return est

    def _sample(self, profile, t: float) -> None:
        zdd = float(profile.accel(t))
        if self.noise_amp > 0.0:
            zdd += self.rng.uniform(-self.noise_amp * self.scn.params.z0,
                                    self.noise_amp * self.scn.params.z0)
        self.ring.append((zdd + self.scn.params.g) / self.scn.params.z0)
        if len(self.ring) > self.ring_len:
            self.ring.pop(0)

    def at_tick(self, profile, k: int, sub_idx: int, t: float) -> float:
        """Bound used by within-phase planning for the upcoming switch."""
        if self.oracle:
            rest = float(self.suffix[k][2 * sub_idx])
            if k + 1 < len(self.phase_sup):
                rest = max(rest, float(self.phase_sup[k + 1]))
            return self._clamp(rest + self.scn.fbar_margin)
        self._sample(profile, t)
        return self._clamp(max(self.ring) + self.scn.fbar_margin)

    def at_switch(self, profile, j: int, t: float) -> float:
        """Bound for the gain executed at switch j (acts over phase j)."""
        if self.oracle:
            return self._clamp(float(self.phase_sup[j]) + self.scn.fbar_margin)
        if not self.ring:
            self._sample(profile, t)
        return self._clamp(max(self.ring) + self.scn.fbar_margin)


def run_scenario(scn: Scenario) -> SimResult:
    """Execute one closed-loop run.

    The run begins at a switching instant: e0 is the pre-switch error of
    step 0, whose commanded footstep is applied at t = 0, and the final
    phase ends at the last switch, where only the closing error is logged.
    Step n's log therefore carries the gain applied at switch n and the
    certificate for the phase it propagates through; its contraction ratio
    compares the next pre-switch error against e at switch n.
    """
    scn.validate()
    rng = np.random.default_rng(scn.seed)
    params = scn.params
    ref = scn.reference
    profile = scn.profile

    durations = _phase_durations(scn, rng)
    n_phases = len(durations)
    switch_times = np.concatenate([[0.0], np.cumsum(durations)])

    # stiffness on the RK4 half-grid, per phase, plus per-phase suprema
    phase_f = [sample_stiffness(profile, switch_times[k], switch_times[k + 1],
                                scn.dt, params.z0, params.g)
               for k in range(n_phases)]
    phase_sup = np.array([float(f.max()) for f, _, _ in phase_f])
    f_min = min(float(f.min()) for f, _, _ in phase_f)
    if f_min <= 0.0:
        raise ValidationError(
            f"stiffness reaches {f_min:.3f} <= 0 during the run: the surface "
            "acceleration approaches free fall and the model is invalid")

    sways = sorted((d for d in scn.disturbances if d.kind == "sway_accel"
                    and d.axis == scn.axis), key=lambda d: d.time)
    pushes = sorted((d for d in scn.disturbances if d.kind == "velocity_impulse"
                     and d.axis == scn.axis), key=lambda d: d.time)
    fbar = _FbarTracker(scn, phase_f, phase_sup, rng)
    estimator_noisy = fbar.noise_amp > 0.0
    phase_pushed = [
        any(switch_times[k] < d.time <= switch_times[k + 1] + 1e-12
            for d in pushes)
        or any(d.time <= switch_times[k + 1] for d in sways)
        for k in range(n_phases)]
    phase_disturbed = [estimator_noisy or hit for hit in phase_pushed]

    controller = FootstepController(params, ref, eps=scn.qp_eps)
    sub_per_tick = int(round(scn.tick / scn.dt))

    steps: list[StepLog] = []
    rows: list[tuple] = []
    push_idx = 0
    n_fallback = n_infeasible = 0
    max_err = err_norm(scn.e0)
    diverged = False
    plan_gain = scn.fixed_gain if scn.gain_mode == "fixed" else None
    prev_e_pre: tuple[float, float] = scn.e0

    def execute_switch(j: int, e_pre, x_ref_pre, t: float):
        """Solve for the gain at switch j and apply the reset."""
        nonlocal n_fallback, n_infeasible, plan_gain
        u_r_j = x_ref_pre[0] - ref.x_post
        fbar_sw = fbar.at_switch(profile, j, t)
        if scn.gain_mode == "fixed":
            gain = scn.fixed_gain
            status = "fixed"
            u_xd = u_r_j + gain.k1 * e_pre[0] + gain.k2 * e_pre[1]
        else:
            cmd = controller.command(fbar_sw, durations[j], e_pre, u_r=u_r_j)
            gain, status, u_xd = cmd.gain, cmd.qp_status, cmd.u_xd
            if status != QP_STATUS_OPTIMAL:
                n_fallback += 1
                n_infeasible += 1
            plan_gain = gain
        a_dn = certify_gain(fbar_sw, durations[j], gain).a_dn
        pre = HtLipState(x_ref_pre[0] + e_pre[0], x_ref_pre[1] + e_pre[1])
        post = reset_map(pre, u_xd)
        steps.append(StepLog(
            n=j, tau_minus=t, tau_plus=t,
            x_minus=(pre.x, pre.xdot), x_plus=(post.x, post.xdot),
            e_minus=e_pre, u_xd=u_xd, gain=gain, a_dn=a_dn, fbar=fbar_sw,
            qp_status=status, disturbed=phase_disturbed[j],
            pushed=phase_pushed[j]))
        return steps[-1]

    # the run starts at switch 0 with pre-switch error e0
    x_ref_pre0 = (ref.x_pre, ref.xd_pre)
    log0 = execute_switch(0, scn.e0, x_ref_pre0, 0.0)
    state = HtLipState(*log0.x_plus)
    ref_state = (ref.x_post, x_ref_pre0[1])

    for k in range(n_phases):
        t0 = float(switch_times[k])
        t1 = float(switch_times[k + 1])
        f, h, n_sub = phase_f[k]
        d_next = durations[k + 1] if k + 1 < n_phases else durations[k]

        acc = None
        if sways:
            tt = t0 + 0.5 * h * np.arange(2 * n_sub + 1)
            acc = np.zeros_like(tt)
            for d in sways:
                mask = tt >= d.time
                acc[mask] += d.magnitude * np.sin(math.pi * (tt[mask] - d.time))
            acc = np.ascontiguousarray(acc)

        sub = 0
        while sub < n_sub:
            t = t0 + sub * h
            x_ref, xd_ref = _flow_reference(ref, ref_state, sub * h)
            e_now = (state.x - x_ref, state.xdot - xd_ref)
            max_err = max(max_err, err_norm(e_now))
            fbar_tick = fbar.at_tick(profile, k, sub, t)

            if scn.gain_mode == "per_tick":
                sol = controller.plan(fbar_tick, d_next, e_now)
                if sol.status == QP_STATUS_INFEASIBLE:
                    n_infeasible += 1
                    plan_gain = controller.last_gain or GainK(0.0, 0.0)
                else:
                    plan_gain = sol.gain

            if scn.collect_samples:
                g1, g2 = plan_gain
                a_log = certify_gain(fbar_tick, d_next, plan_gain).a_dn
                u_plan = ref.u_xr + g1 * e_now[0] + g2 * e_now[1]
                z, _, zdd = profile.vertical(t)
                rows.append((t, state.x, state.xdot, x_ref, e_now[0], u_plan,
                             g1, g2, a_log, fbar_tick, z, zdd))

            n_chunk = min(sub_per_tick, n_sub - sub)
            end_sub = sub + n_chunk
            t_end = t0 + end_sub * h
            x, xd = state.x, state.xdot
            if push_idx >= len(pushes) or pushes[push_idx].time > t_end + 1e-12:
                lo = 2 * sub
                seg = f[lo:lo + 2 * n_chunk + 1]
                acc_seg = acc[lo:lo + 2 * n_chunk + 1] if acc is not None else None
                x, xd = kernels.rk4_phase(x, xd, seg, h, n_chunk, acc_seg)
            else:
                for ss in range(sub, end_sub):
                    t_sub = t0 + ss * h
                    while (push_idx < len(pushes)
                           and pushes[push_idx].time <= t_sub + 1e-12):
                        xd += pushes[push_idx].magnitude
                        push_idx += 1
                    lo = 2 * ss
                    acc_seg = acc[lo:lo + 3] if acc is not None else None
                    x, xd = kernels.rk4_phase(x, xd, f[lo:lo + 3], h, 1, acc_seg)
                while (push_idx < len(pushes)
                       and pushes[push_idx].time <= t_end + 1e-12):
                    xd += pushes[push_idx].magnitude
                    push_idx += 1
            if not (math.isfinite(x) and math.isfinite(xd)):
                raise ValidationError(f"state became non-finite during step {k}")
            state = HtLipState(x, xd)
            sub = end_sub

        # switching instant at the end of phase k
        x_ref_pre = _flow_reference(ref, ref_state, t1 - t0)
        e_pre = (state.x - x_ref_pre[0], state.xdot - x_ref_pre[1])
        max_err = max(max_err, err_norm(e_pre))

        denom = err_norm(prev_e_pre)
        steps[-1].ratio = err_norm(e_pre) / denom if denom > 0 else None
        prev_e_pre = e_pre

        if err_norm(e_pre) > scn.divergence_err:
            diverged = True
            break
        if k + 1 >= n_phases:
            break

        log = execute_switch(k + 1, e_pre, x_ref_pre, t1)
        state = HtLipState(*log.x_plus)
        ref_state = (ref.x_post, x_ref_pre[1])

    samples = {}
    if scn.collect_samples and rows:
        arr = np.array(rows, dtype=float)
        samples = {name: arr[:, i] for i, name in enumerate(SAMPLE_COLUMNS)}

    ratios = [s.ratio for s in steps if s.ratio is not None]
    return SimResult(
        steps=steps, samples=samples, final_error=prev_e_pre,
        max_err=max_err, diverged=diverged, n_fallback=n_fallback,
        n_infeasible=n_infeasible, n_fbar_clamped=fbar.n_clamped,
        max_ratio=max(ratios) if ratios else None)


@dataclass(frozen=True)
class RandomizationSpec:
    """Bounds for Monte Carlo randomization; zeros reproduce the template."""

    e0_pos: float = 0.0
    e0_vel: float = 0.0
    n_pushes: int = 0
    push_window: tuple[float, float] = (0.0, 0.0)
    push_mag: float = 0.0
    fbar_noise: float = 0.0


def monte_carlo(scn_template: Scenario, n_trials: int,
                spec: RandomizationSpec, success_err: Optional[float] = None) -> dict:
    """Run randomized trials of a scenario and summarize robustness.

    Every trial derives its own seed from (template seed, trial index), so
    the whole sweep is reproducible.  A trial succeeds when the error stays
    bounded, the run does not diverge, and no QP comes back infeasible.
    """
    if n_trials < 1:
        raise ValidationError("n_trials must be at least 1")
    bound = success_err if success_err is not None else scn_template.success_err
    trials = []
    ratios_all = []
    n_success = 0
    for i in range(n_trials):
        scn = randomize_scenario(scn_template, i, spec)
        result = run_scenario(scn)
        ok = (not result.diverged and result.max_err <= bound
              and result.n_infeasible == 0)
        n_success += ok
        step_ratios = [s.ratio for s in result.steps
                       if s.ratio is not None and not s.disturbed
                       and s.qp_status == QP_STATUS_OPTIMAL]
        ratios_all.extend(step_ratios)
        drift = (float(np.mean([s.e_minus[0] for s in result.steps]))
                 if result.steps else 0.0)
        trials.append({
            "trial": i, "seed": scn.seed, "success": bool(ok),
            "max_error_norm": result.max_err,
            "final_error_norm": err_norm(result.final_error),
            "diverged": result.diverged,
            "n_fallback": result.n_fallback,
            "n_infeasible": result.n_infeasible,
            "max_ratio": max(step_ratios) if step_ratios else None,
            "mean_position_drift": drift,
        })
    return {
        "n_trials": n_trials,
        "success_rate": n_success / n_trials,
        "success_bound": bound,
        "mean_contraction_ratio": float(np.mean(ratios_all)) if ratios_all else None,
        "max_contraction_ratio": float(np.max(ratios_all)) if ratios_all else None,
        "trials": trials,
    }


def randomize_scenario(scn_template: Scenario, trial: int,
                       spec: RandomizationSpec) -> Scenario:
    """Derive trial `trial` of a Monte Carlo sweep (deterministic per index)."""
    seq = np.random.SeedSequence([scn_template.seed, trial])
    rng = np.random.default_rng(seq)
    trial_seed = int(seq.generate_state(1)[0])
    e0 = list(scn_template.e0)
    if spec.e0_pos:
        e0[0] += rng.uniform(-spec.e0_pos, spec.e0_pos)
    if spec.e0_vel:
        e0[1] += rng.uniform(-spec.e0_vel, spec.e0_vel)
    dist = list(scn_template.disturbances)
    for _ in range(spec.n_pushes):
        t_push = rng.uniform(*spec.push_window)
        mag = rng.uniform(-spec.push_mag, spec.push_mag)
        dist.append(Disturbance(kind="velocity_impulse", time=float(t_push),
                                magnitude=float(mag)))
    return replace(scn_template, e0=(e0[0], e0[1]), disturbances=tuple(dist),
                   fbar_noise=scn_template.fbar_noise + spec.fbar_noise,
                   seed=trial_seed, collect_samples=False)


def write_trajectory_csv(path, result: SimResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SAMPLE_COLUMNS)
        if result.samples:
            cols = [result.samples[name] for name in SAMPLE_COLUMNS]
            for vals in zip(*cols):
                w.writerow([f"{v:.12g}" for v in vals])


def write_steps_json(path, result: SimResult) -> None:
    with open(path, "w") as fh:
        json.dump([s.to_dict() for s in result.steps], fh, indent=1)


def write_summary_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
