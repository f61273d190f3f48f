"""QP-based footstep gain selection and reference gait construction.

Each step, the feedback gain K = [k1, k2] is chosen by a tiny quadratic
program: minimize the sum of squared row sums of the bound model's
closed-loop step matrix (a strictly convex quadratic in K with an
identity-scaled Hessian) subject to six linear constraints that encode the
stability row sums and the kinematic/ground-contact step-length limits.
With two variables and six half-planes, the global optimum is found exactly
by enumerating the unconstrained, single-row and pairwise-row KKT
candidates; an instance is declared infeasible only after a phase-1 linear
program confirms the constraint polygon is empty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._backend import kernels
from .dynamics import ModelParams, TransitionMatrix, stm_supremum
from .errors import ValidationError
from .stability import GainK

#: Constraint tightening: strict inequalities are solved as <= d - EPS.
DEFAULT_EPS = 1e-6

QP_STATUS_OPTIMAL = "optimal"
QP_STATUS_INFEASIBLE = "infeasible"
QP_STATUS_FALLBACK = "fallback"


@dataclass(frozen=True)
class QpProblem:
    """One gain-selection instance: cost 0.5 K S K^T + K c, rows E K^T <= d - eps."""

    S: np.ndarray
    c: np.ndarray
    E: np.ndarray
    d: np.ndarray
    eps: float
    fbar: float
    dtau: float
    phi: TransitionMatrix
    u_xr: float
    e: tuple[float, float]
    l_min: float
    l_max: float

    def tightened_d(self) -> np.ndarray:
        return self.d - self.eps

    def to_dict(self) -> dict:
        return {
            "S": self.S.tolist(), "c": self.c.tolist(),
            "E": self.E.tolist(), "d": self.d.tolist(), "eps": self.eps,
            "fbar": self.fbar, "dtau": self.dtau, "u_xr": self.u_xr,
            "e": list(self.e), "l_min": self.l_min, "l_max": self.l_max,
        }


@dataclass(frozen=True)
class QpSolution:
    gain: GainK
    status: str
    cost: float
    active_set: tuple[int, ...]
    multipliers: np.ndarray

    def to_dict(self) -> dict:
        return {
            "K": [self.gain.k1, self.gain.k2], "status": self.status,
            "cost": self.cost, "active_set": list(self.active_set),
            "multipliers": self.multipliers.tolist(),
        }


@dataclass(frozen=True)
class ReferenceGait:
    """Period-1 reference orbit of the motionless-surface model.

    The orbit is symmetric about the phase midpoint: the CoM enters a phase
    at -u_xr/2 and leaves it at +u_xr/2 with equal velocities, so resetting
    by the nominal step u_xr reproduces the post-switch state exactly.
    Between switches the reference follows the constant-stiffness flow at
    f0 = g / z0; the surface motion is unknown to the planner, and the
    resulting mismatch is part of what the footstep feedback absorbs.
    """

    v_des: float
    dtau: float
    u_xr: float
    f0: float
    x_post: float
    xd_post: float

    @property
    def x_pre(self) -> float:
        return self.x_post + self.u_xr

    @property
    def xd_pre(self) -> float:
        return self.xd_post

    def state_at(self, s: float) -> tuple[float, float]:
        """Reference (x_r, xd_r) a time s into a phase, s in [0, dtau]."""
        sq = math.sqrt(self.f0)
        c = math.cosh(sq * s)
        sh = math.sinh(sq * s)
        return (c * self.x_post + sh / sq * self.xd_post,
                sq * sh * self.x_post + c * self.xd_post)


@dataclass(frozen=True)
class FootstepCommand:
    u_xd: float
    gain: GainK
    qp_status: str


def make_reference(v_des: float, dtau: float, profile, params: ModelParams) -> ReferenceGait:
    """Build the period-1 reference for a desired average CoM velocity.

    The nominal step length is v_des * dtau and must respect the kinematic
    range.  The profile argument is accepted for interface symmetry but the
    reference deliberately ignores the surface motion (see ReferenceGait).
    """
    u_xr = v_des * dtau
    if not params.u_min <= u_xr <= params.u_max:
        raise ValidationError(
            f"nominal step {u_xr:.4f} m outside kinematic range "
            f"[{params.u_min}, {params.u_max}]")
    f0 = params.f0
    if v_des == 0.0:
        return ReferenceGait(v_des=0.0, dtau=dtau, u_xr=0.0, f0=f0,
                             x_post=0.0, xd_post=0.0)
    sq = math.sqrt(f0)
    xd = sq * (u_xr / 2.0) / math.tanh(sq * dtau / 2.0)
    return ReferenceGait(v_des=v_des, dtau=dtau, u_xr=u_xr, f0=f0,
                         x_post=-u_xr / 2.0, xd_post=xd)


def build_qp(fbar: float, dtau: float, e: tuple[float, float], u_xr: float,
             params: ModelParams, eps: float = DEFAULT_EPS) -> QpProblem:
    """Assemble the gain-selection QP for one step.

    The Hessian is 2*(p11^2 + p21^2) times the identity and the gradient
    couples the two columns of the bound model's transition matrix, so the
    unconstrained minimizer always has k1 = 1.  Rows 1-2 bound K e so the
    commanded step stays inside the effective step-length limits; rows 3-6
    are the linearized stability row sums and depend only on the matrix.
    """
    if fbar <= 0:
        raise ValidationError("fbar must be positive")
    if dtau <= 0:
        raise ValidationError("dtau must be positive")
    phi = stm_supremum(fbar, dtau)
    p11, p12, p21, p22 = phi
    w = 2.0 * (p11 * p11 + p21 * p21)
    S = np.array([[w, 0.0], [0.0, w]])
    c = np.array([-w, -2.0 * (p11 * p12 + p21 * p22)])
    err, errd = e
    l_min, l_max = params.step_bounds()
    E = np.array([
        [err, errd],
        [-err, -errd],
        [-p11, -p11],
        [p11, p11],
        [-p21, -p21],
        [p21, p21],
    ])
    d = np.array([
        l_max - u_xr,
        -l_min + u_xr,
        1.0 - p11 - p12,
        1.0 + p11 + p12,
        1.0 - p21 - p22,
        1.0 + p21 + p22,
    ])
    return QpProblem(S=S, c=c, E=E, d=d, eps=eps, fbar=fbar, dtau=dtau,
                     phi=phi, u_xr=u_xr, e=(float(err), float(errd)),
                     l_min=l_min, l_max=l_max)


def solve_qp(qp: QpProblem, want_multipliers: bool = True) -> QpSolution:
    """Globally minimize the gain QP, or prove it infeasible.

    Candidate enumeration covers every possible active set of a strictly
    convex 2-variable QP (1 unconstrained + 6 single + 15 pairs).  When no
    candidate is feasible the half-plane intersection must be empty; a
    phase-1 LP double-checks that before infeasibility is reported.
    Multiplier recovery costs a least-squares solve, so hot loops skip it.
    """
    d_t = qp.tightened_d()
    ef = np.ascontiguousarray(qp.E, dtype=float).ravel()
    k1, k2, cost, code, a1, a2 = kernels.qp_solve(
        float(qp.S[0, 0]), float(qp.c[0]), float(qp.c[1]), ef,
        np.ascontiguousarray(d_t, dtype=float))
    if code == kernels.QP_OPTIMAL:
        gain = GainK(k1, k2)
        active = tuple(i for i in (a1, a2) if i >= 0)
        lam = _multipliers(qp, gain, active) if want_multipliers else np.zeros(6)
        return QpSolution(gain=gain, status=QP_STATUS_OPTIMAL, cost=cost,
                          active_set=active, multipliers=lam)
    if not _confirm_empty(qp.E, d_t):
        raise RuntimeError("candidate enumeration found nothing feasible but the "
                           "phase-1 LP disagrees; this indicates a solver bug")
    return QpSolution(gain=GainK(0.0, 0.0), status=QP_STATUS_INFEASIBLE,
                      cost=math.inf, active_set=(), multipliers=np.zeros(6))


def _multipliers(qp: QpProblem, gain: GainK, active: tuple[int, ...]) -> np.ndarray:
    """KKT multipliers supported on the active rows (zero elsewhere)."""
    lam = np.zeros(6)
    if not active:
        return lam
    grad = qp.S @ np.array([gain.k1, gain.k2]) + qp.c
    ea = qp.E[list(active)]
    sol, *_ = np.linalg.lstsq(ea.T, -grad, rcond=None)
    lam[list(active)] = sol
    return lam


def _confirm_empty(E: np.ndarray, d: np.ndarray, tol: float = 1e-9) -> bool:
    """Phase-1 LP: minimize t subject to E K - t <= d; empty iff min t > 0."""
    from scipy.optimize import linprog

    a_ub = np.hstack([E, -np.ones((6, 1))])
    res = linprog(c=[0.0, 0.0, 1.0], A_ub=a_ub, b_ub=d,
                  bounds=[(None, None)] * 3, method="highs")
    if res.status == 3:  # unbounded below: strictly feasible directions exist
        return False
    if res.status != 0:
        raise RuntimeError(f"phase-1 LP failed with status {res.status}")
    return res.fun > tol


def kkt_residuals(qp: QpProblem, sol: QpSolution) -> dict:
    """Stationarity, primal feasibility and complementarity residuals."""
    k = np.array([sol.gain.k1, sol.gain.k2])
    lam = sol.multipliers
    stationarity = float(np.max(np.abs(qp.S @ k + qp.c + qp.E.T @ lam)))
    slack = qp.tightened_d() - qp.E @ k
    primal = float(max(0.0, -np.min(slack)))
    complementarity = float(np.max(np.abs(lam * slack)))
    dual = float(max(0.0, -np.min(lam)))
    return {"stationarity": stationarity, "primal": primal,
            "complementarity": complementarity, "dual": dual}


def compute_footstep(k: GainK, e: tuple[float, float], u_xr: float) -> float:
    """Commanded step: nominal length plus gain times the pre-switch error."""
    return u_xr + k.k1 * e[0] + k.k2 * e[1]


class FootstepController:
    """Per-axis stepping controller owning the last-feasible-gain cache.

    One instance per simulated axis; instances are independent, so separate
    workers can each own one safely.
    """

    def __init__(self, params: ModelParams, reference: ReferenceGait,
                 eps: float = DEFAULT_EPS):
        self.params = params
        self.reference = reference
        self.eps = eps
        self.last_gain: Optional[GainK] = None

    def plan(self, fbar: float, dtau: float, e: tuple[float, float]) -> QpSolution:
        """Re-solve the gain QP for the current error and bound estimate."""
        qp = build_qp(fbar, dtau, e, self.reference.u_xr, self.params, self.eps)
        sol = solve_qp(qp, want_multipliers=False)
        if sol.status == QP_STATUS_OPTIMAL:
            self.last_gain = sol.gain
        return sol

    def command(self, fbar: float, dtau: float, e: tuple[float, float],
                u_r: Optional[float] = None) -> FootstepCommand:
        """Commanded footstep at a switching instant with pre-switch error e.

        `u_r` overrides the nominal step length (used when per-step jitter
        makes the realized reference step differ from the nominal one).  On
        an infeasible QP the controller falls back to the last feasible
        gain (zero gain if none yet) and clamps the command into the
        effective step-length limits.
        """
        if u_r is None:
            u_r = self.reference.u_xr
        sol = self.plan(fbar, dtau, e)
        if sol.status == QP_STATUS_OPTIMAL:
            return FootstepCommand(u_xd=compute_footstep(sol.gain, e, u_r),
                                   gain=sol.gain, qp_status=QP_STATUS_OPTIMAL)
        gain = self.last_gain if self.last_gain is not None else GainK(0.0, 0.0)
        l_min, l_max = self.params.step_bounds()
        u = min(max(compute_footstep(gain, e, u_r), l_min), l_max)
        return FootstepCommand(u_xd=u, gain=gain, qp_status=QP_STATUS_FALLBACK)
