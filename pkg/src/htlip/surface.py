"""Vertical surface motion models.

A motion profile evaluates the vertical displacement z_s(t) of the support
surface at the foothold, together with its first two time derivatives, for
all t >= 0.  Pitch-program profiles describe a treadmill-style surface that
pitches about a fixed axis; the foothold sits a lever arm r from that axis,
so z_s = r*sin(theta_s).  Profiles are immutable after construction and
evaluation is pure, so they are safe to share between simulation workers.

The module also provides estimators for an upper bound on the normalized
surface stiffness f(t) = (z̈_s(t) + g) / z0, both over a known future window
(oracle) and over a backward window of past samples (causal), the latter
optionally corrupted by estimation noise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ValidationError

DEG = math.pi / 180.0

#: Default lever arm from the pitch axis to the foothold, in meters.
DEFAULT_LEVER_ARM = 0.8

#: Central-difference step used wherever derivatives lack a closed form.
FD_STEP = 1e-4


class AccelBoundEstimate(NamedTuple):
    """Upper bound on f(t) over a window, plus the margin baked into it."""

    fbar: float
    window: float
    margin: float


class MotionProfile:
    """Base class: a motionless surface."""

    kind = "static"
    lever_arm = 0.0

    def pitch(self, t):
        raise ValidationError(f"profile kind '{self.kind}' has no pitch program")

    def vertical(self, t):
        """Return (z_s, zdot_s, zddot_s) at time t (scalar or array)."""
        z = np.zeros_like(np.asarray(t, dtype=float))
        if np.ndim(t) == 0:
            return 0.0, 0.0, 0.0
        return z, z.copy(), z.copy()

    def accel(self, t):
        return self.vertical(t)[2]

    def describe(self) -> str:
        return self.kind


class StaticProfile(MotionProfile):
    pass


class SinusoidProfile(MotionProfile):
    """Sinusoidal motion, either a vertical displacement (amplitude in m)
    or a pitch program (amplitude in rad, converted at the foothold)."""

    kind = "sinusoid"

    def __init__(self, amplitude_m=None, amplitude_rad=None, omega=2.0 * math.pi,
                 phase=0.0, lever_arm=DEFAULT_LEVER_ARM):
        if (amplitude_m is None) == (amplitude_rad is None):
            raise ValidationError("sinusoid takes exactly one of amplitude_m, amplitude_rad")
        self.amplitude_m = amplitude_m
        self.amplitude_rad = amplitude_rad
        self.omega = float(omega)
        self.phase = float(phase)
        self.lever_arm = float(lever_arm)

    def pitch(self, t):
        if self.amplitude_rad is None:
            raise ValidationError("vertical sinusoid has no pitch program")
        return self.amplitude_rad * np.sin(self.omega * np.asarray(t, dtype=float) + self.phase)

    def _pitch_derivs(self, t):
        a, w = self.amplitude_rad, self.omega
        arg = w * t + self.phase
        return a * np.sin(arg), a * w * np.cos(arg), -a * w * w * np.sin(arg)

    def vertical(self, t):
        t = np.asarray(t, dtype=float) if np.ndim(t) else float(t)
        if self.amplitude_m is not None:
            a, w = self.amplitude_m, self.omega
            arg = w * t + self.phase
            return a * np.sin(arg), a * w * np.cos(arg), -a * w * w * np.sin(arg)
        th, thd, thdd = self._pitch_derivs(t)
        return _foothold_vertical(self.lever_arm, th, thd, thdd)

    def describe(self) -> str:
        if self.amplitude_m is not None:
            return f"sinusoid A={self.amplitude_m} m, omega={self.omega} rad/s"
        return f"pitch sinusoid A={self.amplitude_rad} rad, omega={self.omega} rad/s"


class PitchProgramProfile(MotionProfile):
    """The named treadmill pitch programs HC1..HC5.

    HC1/HC4 share theta(t) = A*(sin(3t) + sin(t*sqrt(t/2 + 1))) with A = 4 deg,
    HC5 is the same chirp at 2.5 deg, HC2 uses sin(6t) + sin(0.1 t^2), and HC3
    is a decaying swept oscillation.  The amplitude may be overridden to scale
    a case.  All derivatives are evaluated in closed form.
    """

    kind = "table1_case"

    DEFAULT_AMP_DEG = {"HC1": 4.0, "HC2": 4.0, "HC3": 0.2, "HC4": 4.0, "HC5": 2.5}

    def __init__(self, case_id: str, lever_arm=DEFAULT_LEVER_ARM, amplitude_deg=None):
        case_id = case_id.upper()
        if case_id not in self.DEFAULT_AMP_DEG:
            raise ValidationError(f"unknown pitch program '{case_id}'")
        self.case_id = case_id
        self.lever_arm = float(lever_arm)
        amp = self.DEFAULT_AMP_DEG[case_id] if amplitude_deg is None else float(amplitude_deg)
        self.amplitude = amp * DEG

    def _pitch_derivs(self, t):
        a = self.amplitude
        if self.case_id in ("HC1", "HC4", "HC5"):
            th1, td1, tdd1 = _sine(t, 3.0)
            th2, td2, tdd2 = _sqrt_chirp(t, 0.5)
        elif self.case_id == "HC2":
            th1, td1, tdd1 = _sine(t, 6.0)
            th2, td2, tdd2 = _quadratic_chirp(t, 0.1)
        else:  # HC3
            return _decaying_sweep(t, a)
        return a * (th1 + th2), a * (td1 + td2), a * (tdd1 + tdd2)

    def pitch(self, t):
        return self._pitch_derivs(np.asarray(t, dtype=float) if np.ndim(t) else float(t))[0]

    def vertical(self, t):
        t = np.asarray(t, dtype=float) if np.ndim(t) else float(t)
        th, thd, thdd = self._pitch_derivs(t)
        return _foothold_vertical(self.lever_arm, th, thd, thdd)

    def describe(self) -> str:
        return f"{self.case_id} pitch program, r={self.lever_arm} m"


class SampledProfile(MotionProfile):
    """Displacement samples (t_i, z_i) interpolated with a cubic spline;
    derivatives come from central differences on the interpolant."""

    kind = "sampled"

    def __init__(self, times, positions):
        times = np.asarray(times, dtype=float)
        positions = np.asarray(positions, dtype=float)
        if times.ndim != 1 or times.shape != positions.shape:
            raise ValidationError("sample buffer must be two equal-length columns")
        if times.size < 3:
            raise ValidationError("sample buffer needs at least 3 points")
        if np.any(np.diff(times) <= 0):
            raise ValidationError("sample times must be strictly increasing")
        from scipy.interpolate import CubicSpline

        self.t_min = float(times[0])
        self.t_max = float(times[-1])
        self._spline = CubicSpline(times, positions, bc_type="natural", extrapolate=True)

    def vertical(self, t):
        t = np.asarray(t, dtype=float) if np.ndim(t) else float(t)
        h = FD_STEP
        z = self._spline(t)
        zp, zm = self._spline(t + h), self._spline(t - h)
        zd = (zp - zm) / (2.0 * h)
        zdd = (zp - 2.0 * z + zm) / (h * h)
        if np.ndim(t) == 0:
            return float(z), float(zd), float(zdd)
        return z, zd, zdd

    @classmethod
    def from_csv(cls, path):
        times, positions = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    times.append(float(row[0]))
                    positions.append(float(row[1]))
                except (ValueError, IndexError):
                    # tolerate a single header line
                    if times:
                        raise ValidationError(f"bad sample row {row!r} in {path}")
        return cls(times, positions)


class TimeShiftedProfile(MotionProfile):
    """Evaluate an underlying profile at t + offset.

    Lets a scenario start mid-program, e.g. in the strongly accelerating
    late portion of a chirp, while simulation time still runs from zero.
    """

    def __init__(self, base: MotionProfile, offset: float):
        if offset < 0:
            raise ValidationError("time offset must be nonnegative")
        self.base = base
        self.offset = float(offset)
        self.kind = base.kind
        self.lever_arm = base.lever_arm

    def pitch(self, t):
        return self.base.pitch(np.asarray(t) + self.offset if np.ndim(t)
                               else t + self.offset)

    def vertical(self, t):
        return self.base.vertical(np.asarray(t) + self.offset if np.ndim(t)
                                  else t + self.offset)

    def describe(self) -> str:
        return f"{self.base.describe()} shifted by {self.offset} s"


def _foothold_vertical(r, th, thd, thdd):
    """Map pitch (and derivatives) to foothold height: z = r*sin(theta)."""
    s, c = np.sin(th), np.cos(th)
    z = r * s
    zd = r * c * thd
    zdd = r * (c * thdd - s * thd * thd)
    return z, zd, zdd


def _sine(t, w):
    return np.sin(w * t), w * np.cos(w * t), -w * w * np.sin(w * t)


def _sqrt_chirp(t, half):
    # sin(phi) with phi = t*sqrt(half*t + 1)
    u = np.sqrt(half * t + 1.0)
    phi = t * u
    phid = (1.5 * half * t + 1.0) / u
    phidd = (0.75 * half * half * t + half) / (u * u * u)
    s, c = np.sin(phi), np.cos(phi)
    return s, phid * c, phidd * c - phid * phid * s


def _quadratic_chirp(t, rate):
    # sin(rate * t^2)
    phi = rate * t * t
    phid = 2.0 * rate * t
    s, c = np.sin(phi), np.cos(phi)
    return s, phid * c, 2.0 * rate * c - phid * phid * s


def _decaying_sweep(t, a):
    # a * t^2 * sin(sqrt(100 t + 1)) * exp(-t/10), with a in rad
    u = np.sqrt(100.0 * t + 1.0)
    ud = 50.0 / u
    udd = -2500.0 / (u * u * u)
    s, c = np.sin(u), np.cos(u)
    g = s
    gd = ud * c
    gdd = udd * c - ud * ud * s
    env = np.exp(-t / 10.0)
    p = t * t * env
    pd = (2.0 * t - t * t / 10.0) * env
    pdd = (2.0 - 0.4 * t + t * t / 100.0) * env
    return a * p * g, a * (pd * g + p * gd), a * (pdd * g + 2.0 * pd * gd + p * gdd)


def make_profile(kind: str, **kw) -> MotionProfile:
    """Construct a profile by kind name. Unknown parameters raise."""
    kind = kind.lower()
    offset = kw.pop("t_offset", 0.0)
    profile = _make_profile_base(kind, kw)
    if offset:
        profile = TimeShiftedProfile(profile, offset)
    return profile


def _make_profile_base(kind: str, kw: dict) -> MotionProfile:
    if kind == "static":
        _reject_extras(kw, ())
        return StaticProfile()
    if kind == "sinusoid":
        _reject_extras(kw, ("amplitude_m", "amplitude_rad", "amplitude_deg",
                            "omega", "phase", "lever_arm"))
        if "amplitude_deg" in kw:
            kw["amplitude_rad"] = kw.pop("amplitude_deg") * DEG
        return SinusoidProfile(**kw)
    if kind in ("table1_case", "pitch_program") or kind.upper() in PitchProgramProfile.DEFAULT_AMP_DEG:
        if kind.upper() in PitchProgramProfile.DEFAULT_AMP_DEG:
            kw.setdefault("case_id", kind.upper())
        _reject_extras(kw, ("case_id", "lever_arm", "amplitude_deg"))
        return PitchProgramProfile(**kw)
    if kind == "sampled":
        _reject_extras(kw, ("times", "positions", "sample_file"))
        if "sample_file" in kw:
            return SampledProfile.from_csv(kw["sample_file"])
        return SampledProfile(kw["times"], kw["positions"])
    raise ValidationError(f"unknown profile kind '{kind}'")


def _reject_extras(kw, allowed):
    for key in kw:
        if key not in allowed:
            raise ValidationError(f"unknown profile parameter '{key}'")


def eval_pitch(profile: MotionProfile, t):
    """Surface pitch angle theta_s(t) in radians."""
    return profile.pitch(t)


def eval_vertical(profile: MotionProfile, t):
    """Foothold vertical displacement, velocity and acceleration at t."""
    return profile.vertical(t)


def stiffness_grid(profile, t0, t1, z0, g, grid_s=1e-3):
    """Sample f(t) = (zdd_s + g)/z0 on a dense grid over [t0, t1]."""
    n = max(2, int(math.ceil((t1 - t0) / grid_s)) + 1)
    tt = np.linspace(t0, t1, n)
    return tt, (profile.accel(tt) + g) / z0


def estimate_fbar(profile: MotionProfile, t_now: float, horizon: float, z0: float,
                  g: float = 9.81, margin: float = 0.0, grid_s: float = 1e-3) -> AccelBoundEstimate:
    """Upper bound on f over the coming window [t_now, t_now + horizon].

    Raises if the bound is not positive: a surface in near free fall is
    outside the model's validity.
    """
    if z0 <= 0:
        raise ValidationError("z0 must be positive")
    if horizon <= 0:
        raise ValidationError("horizon must be positive")
    _, f = stiffness_grid(profile, t_now, t_now + horizon, z0, g, grid_s)
    fbar = float(np.max(f)) + margin
    if fbar <= 0:
        raise ValidationError(f"estimated stiffness bound {fbar:.3f} <= 0: surface near free fall")
    return AccelBoundEstimate(fbar=fbar, window=horizon, margin=margin)


def estimate_fbar_causal(profile: MotionProfile, t_now: float, window: float, z0: float,
                         g: float = 9.81, margin: float = 0.0, noise_amp: float = 0.0,
                         rng=None, grid_s: float = 1e-3) -> AccelBoundEstimate:
    """Causal bound from a backward window of (possibly noisy) acceleration.

    Used when the surface motion is unknown to the controller: the window
    looks one gait cycle into the past and the additive margin absorbs the
    estimator's error.  When noise_amp > 0, uniform noise of that amplitude
    is added to each sampled acceleration before taking the maximum.
    """
    if z0 <= 0:
        raise ValidationError("z0 must be positive")
    t0 = max(0.0, t_now - window)
    n = max(2, int(math.ceil((t_now - t0) / grid_s)) + 1) if t_now > t0 else 1
    tt = np.linspace(t0, t_now, n)
    zdd = np.asarray(profile.accel(tt), dtype=float)
    if noise_amp > 0.0:
        if rng is None:
            rng = np.random.default_rng()
        zdd = zdd + rng.uniform(-noise_amp, noise_amp, size=zdd.shape)
    fbar = float(np.max((zdd + g) / z0)) + margin
    if fbar <= 0:
        raise ValidationError(f"estimated stiffness bound {fbar:.3f} <= 0: surface near free fall")
    return AccelBoundEstimate(fbar=fbar, window=window, margin=margin)
