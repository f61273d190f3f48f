"""Hybrid pendulum dynamics on a vertically moving surface.

Continuous phases follow xddot = f(t) * x with f(t) = (zdd_s(t) + g) / z0,
the horizontal CoM coordinate x measured relative to the support point.
Foot switches reset x by the commanded step length while the velocity stays
continuous.  The module provides the reset map, fixed-step RK4 integration
of states and state-transition matrices for the true time-varying system,
and the closed-form transition matrix of the constant-stiffness bound model
used by the stability certificates.

All operations are pure functions; per-axis dynamics are independent, so x
and y axes are simply two instances with their own parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._backend import kernels
from .errors import ValidationError
from .surface import MotionProfile

#: Default RK4 step: time constants are >= 0.13 s for realistic stiffness,
#: so 1 ms keeps the relative integration error near 1e-8.
DEFAULT_DT = 1e-3


class HtLipState(NamedTuple):
    """CoM position and velocity relative to the support point."""

    x: float
    xdot: float


class TransitionMatrix(NamedTuple):
    """2x2 state-transition matrix, row major."""

    p11: float
    p12: float
    p21: float
    p22: float

    @property
    def det(self) -> float:
        return self.p11 * self.p22 - self.p12 * self.p21

    def as_array(self) -> np.ndarray:
        return np.array([[self.p11, self.p12], [self.p21, self.p22]])

    def apply(self, state: HtLipState) -> HtLipState:
        return HtLipState(self.p11 * state.x + self.p12 * state.xdot,
                          self.p21 * state.x + self.p22 * state.xdot)

    @classmethod
    def identity(cls) -> "TransitionMatrix":
        return cls(1.0, 0.0, 0.0, 1.0)


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the pendulum and its step limits."""

    z0: float = 0.25
    g: float = 9.81
    mu: float = 0.8
    u_min: float = -0.15
    u_max: float = 0.15
    dtau: float = 0.3
    step_bound_mode: str = "union"  # or "strict_intersection"

    def __post_init__(self):
        if self.z0 <= 0:
            raise ValidationError("z0 must be positive")
        if self.g <= 0:
            raise ValidationError("g must be positive")
        if self.mu <= 0:
            raise ValidationError("mu must be positive")
        if self.u_min >= self.u_max:
            raise ValidationError("u_min must be below u_max")
        if not 0.0 < self.dtau <= 2.0:
            raise ValidationError("dtau must be positive and bounded")
        if self.step_bound_mode not in ("union", "strict_intersection"):
            raise ValidationError(f"unknown step_bound_mode '{self.step_bound_mode}'")

    @property
    def f0(self) -> float:
        """Stiffness of the motionless-surface model, g / z0."""
        return self.g / self.z0

    def step_bounds(self) -> tuple[float, float]:
        """Effective step-length bounds combining kinematics and friction.

        The default combines them as max/min of the two limits; the
        strict_intersection mode instead intersects the kinematic range
        with the friction bound 2*mu*z0.
        """
        if self.step_bound_mode == "strict_intersection":
            return (max(self.u_min, -2.0 * self.mu * self.z0),
                    min(self.u_max, 2.0 * self.mu * self.z0))
        return (min(self.u_min, -self.mu * self.z0),
                max(self.u_max, self.mu * self.z0))


def stiffness(params: ModelParams, zdd_s: float) -> float:
    """Time-varying pendulum stiffness (zdd_s + g) / z0.

    May be negative; callers reject non-positive values where the model
    requires positive stiffness.
    """
    return (zdd_s + params.g) / params.z0


def reset_map(state_minus: HtLipState, u_xd: float) -> HtLipState:
    """Foot-switch jump: position shifts by the step, velocity continuous."""
    return HtLipState(state_minus.x - u_xd, state_minus.xdot)


def sample_stiffness(profile: MotionProfile, t0: float, t1: float, dt: float,
                     z0: float, g: float):
    """Stiffness samples on the RK4 half-grid over [t0, t1].

    Returns (f_samples, h, n): n uniform steps of size |h| <= dt, with
    2*n + 1 samples so every RK4 stage lands exactly on a sample.  A span
    with t1 < t0 integrates backward in time (h negative).
    """
    span = t1 - t0
    if span == 0:
        raise ValidationError("integration span must be nonzero")
    n = max(1, int(math.ceil(abs(span) / dt - 1e-12)))
    h = span / n
    tt = t0 + 0.5 * h * np.arange(2 * n + 1)
    f = (np.asarray(profile.accel(tt), dtype=float) + g) / z0
    return np.ascontiguousarray(f), h, n


def integrate_phase(state: HtLipState, profile: MotionProfile, params: ModelParams,
                    t0: float, t1: float, dt: float = DEFAULT_DT) -> HtLipState:
    """Integrate one continuous phase from t0 to t1 with fixed-step RK4.

    The step is shortened uniformly so the last step lands exactly on t1.
    """
    f, h, n = sample_stiffness(profile, t0, t1, dt, params.z0, params.g)
    x, xd = kernels.rk4_phase(state.x, state.xdot, f, h, n)
    if not (math.isfinite(x) and math.isfinite(xd)):
        raise ValidationError("state became non-finite during integration")
    return HtLipState(x, xd)


def stm_numeric(profile: MotionProfile, t0: float, t1: float, dt: float,
                z0: float, g: float) -> TransitionMatrix:
    """State-transition matrix of the true time-varying phase dynamics.

    Integrates the matrix equation from the identity with the same RK4
    scheme as integrate_phase.  The flow has unit determinant (the system
    matrix is trace-free), which is verified to 1e-6 as an integration
    sanity check.
    """
    if t1 == t0:
        return TransitionMatrix.identity()
    f, h, n = sample_stiffness(profile, t0, t1, dt, z0, g)
    p11, p12, p21, p22 = kernels.rk4_stm(f, h, n)
    if not all(map(math.isfinite, (p11, p12, p21, p22))):
        raise ValidationError("transition matrix became non-finite during integration")
    phi = TransitionMatrix(p11, p12, p21, p22)
    if abs(phi.det - 1.0) >= 1e-6:
        raise ValidationError(f"transition-matrix determinant drifted to {phi.det!r}")
    return phi


def stm_supremum(fbar: float, dtau: float) -> TransitionMatrix:
    """Closed-form transition matrix of the constant-stiffness bound model.

    Entries are cosh/sinh in xi = dtau * sqrt(fbar); the determinant is
    exactly one by the hyperbolic identity.
    """
    if fbar <= 0:
        raise ValidationError("fbar must be positive")
    if dtau < 0:
        raise ValidationError("dtau must be nonnegative")
    sq = math.sqrt(fbar)
    xi = dtau * sq
    c = math.cosh(xi)
    s = math.sinh(xi)
    return TransitionMatrix(c, s / sq, sq * s, c)
