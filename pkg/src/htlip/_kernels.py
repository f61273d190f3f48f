"""Pure-Python fallback for the hot numerical kernels.

Mirrors the compiled extension `htlip._speedups` exactly; the active
implementation is chosen at import time in `htlip._backend`.  Everything
here works on plain floats and pre-sampled stiffness arrays so the inner
loops stay allocation-free.
"""

from __future__ import annotations

import math

COMPILED = False

_FEAS_TOL = 1e-9

# status codes returned by qp_solve
QP_OPTIMAL = 0
QP_NO_CANDIDATE = 1


def rk4_phase(x, xd, f, h, n, acc=None):
    """Propagate [x, xd] through n fixed RK4 steps of size h.

    Dynamics: xddot = f(t) * x + a(t).  `f` (and `acc` when given) hold
    samples at the step half-grid: index 2*i is the start of step i,
    2*i + 1 its midpoint, 2*i + 2 its end, so len == 2*n + 1.
    """
    sixth = h / 6.0
    half = 0.5 * h
    for i in range(n):
        j = 2 * i
        f0 = f[j]
        f1 = f[j + 1]
        f2 = f[j + 2]
        if acc is None:
            a0 = a1 = a2 = 0.0
        else:
            a0, a1, a2 = acc[j], acc[j + 1], acc[j + 2]
        k1x = xd
        k1v = f0 * x + a0
        k2x = xd + half * k1v
        k2v = f1 * (x + half * k1x) + a1
        k3x = xd + half * k2v
        k3v = f1 * (x + half * k2x) + a1
        k4x = xd + h * k3v
        k4v = f2 * (x + h * k3x) + a2
        x = x + sixth * (k1x + 2.0 * (k2x + k3x) + k4x)
        xd = xd + sixth * (k1v + 2.0 * (k2v + k3v) + k4v)
    return x, xd


def rk4_stm(f, h, n):
    """State-transition matrix of xddot = f(t) x over n RK4 steps of size h.

    Integrates the matrix equation column by column from the identity;
    sampling convention as in rk4_phase.  Returns (p11, p12, p21, p22).
    """
    p11, p21 = 1.0, 0.0
    p12, p22 = 0.0, 1.0
    sixth = h / 6.0
    half = 0.5 * h
    for i in range(n):
        j = 2 * i
        f0 = f[j]
        f1 = f[j + 1]
        f2 = f[j + 2]
        # column 1
        k1x = p21
        k1v = f0 * p11
        k2x = p21 + half * k1v
        k2v = f1 * (p11 + half * k1x)
        k3x = p21 + half * k2v
        k3v = f1 * (p11 + half * k2x)
        k4x = p21 + h * k3v
        k4v = f2 * (p11 + h * k3x)
        p11 = p11 + sixth * (k1x + 2.0 * (k2x + k3x) + k4x)
        p21 = p21 + sixth * (k1v + 2.0 * (k2v + k3v) + k4v)
        # column 2
        k1x = p22
        k1v = f0 * p12
        k2x = p22 + half * k1v
        k2v = f1 * (p12 + half * k1x)
        k3x = p22 + half * k2v
        k3v = f1 * (p12 + half * k2x)
        k4x = p22 + h * k3v
        k4v = f2 * (p12 + h * k3x)
        p12 = p12 + sixth * (k1x + 2.0 * (k2x + k3x) + k4x)
        p22 = p22 + sixth * (k1v + 2.0 * (k2v + k3v) + k4v)
    return p11, p12, p21, p22


def cert_rows(fbar, dtau, k1, k2):
    """Absolute row sums of the constant-bound closed-loop step matrix."""
    xi = dtau * math.sqrt(fbar)
    sq = math.sqrt(fbar)
    c = math.cosh(xi)
    s = math.sinh(xi)
    p11 = c
    p12 = s / sq
    p21 = sq * s
    p22 = c
    row1 = abs((1.0 - k1) * p11) + abs(p12 - k2 * p11)
    row2 = abs((1.0 - k1) * p21) + abs(p22 - k2 * p21)
    return row1, row2


def _feasible(k1, k2, E, d):
    for m in range(6):
        lhs = E[2 * m] * k1 + E[2 * m + 1] * k2
        if lhs > d[m] + _FEAS_TOL * (1.0 + abs(d[m])):
            return False
    return True


def qp_solve(s, c1, c2, E, d):
    """Minimize 0.5*s*(k1^2+k2^2) + c1*k1 + c2*k2 s.t. E [k1,k2]^T <= d.

    `E` is the 6x2 constraint matrix flattened row-major, `d` its right-hand
    side (already tightened by the caller).  Solved by enumerating the
    unconstrained minimizer, all single-row and all pairwise-row KKT
    candidates and keeping the cheapest feasible one; the Hessian is a
    positive multiple of the identity so every candidate is closed-form.

    Returns (k1, k2, cost, status, act1, act2) where act* are the active
    row indices of the winning candidate (-1 when fewer than two are
    active).  status is QP_OPTIMAL or QP_NO_CANDIDATE; the latter means
    no candidate was feasible, which for this constraint structure implies
    an empty feasible set (callers confirm with a phase-1 LP).
    """
    best_cost = math.inf
    bk1 = bk2 = 0.0
    ba1 = ba2 = -1

    # zero rows with a negative bound make the whole program infeasible
    for m in range(6):
        if E[2 * m] == 0.0 and E[2 * m + 1] == 0.0:
            if d[m] < -_FEAS_TOL:
                return 0.0, 0.0, math.inf, QP_NO_CANDIDATE, -1, -1

    u1 = -c1 / s
    u2 = -c2 / s
    if _feasible(u1, u2, E, d):
        best_cost = 0.5 * s * (u1 * u1 + u2 * u2) + c1 * u1 + c2 * u2
        bk1, bk2 = u1, u2

    for i in range(6):
        e1 = E[2 * i]
        e2 = E[2 * i + 1]
        nn = e1 * e1 + e2 * e2
        if nn <= 0.0:
            continue
        # equality minimizer on row i: project the unconstrained optimum
        t = (e1 * u1 + e2 * u2 - d[i]) / nn
        k1 = u1 - t * e1
        k2 = u2 - t * e2
        if _feasible(k1, k2, E, d):
            cost = 0.5 * s * (k1 * k1 + k2 * k2) + c1 * k1 + c2 * k2
            if cost < best_cost:
                best_cost, bk1, bk2, ba1, ba2 = cost, k1, k2, i, -1

    for i in range(6):
        a1 = E[2 * i]
        a2 = E[2 * i + 1]
        for jj in range(i + 1, 6):
            b1 = E[2 * jj]
            b2 = E[2 * jj + 1]
            det = a1 * b2 - a2 * b1
            scale = max(abs(a1), abs(a2), abs(b1), abs(b2))
            if abs(det) <= 1e-14 * scale * scale:
                continue
            k1 = (d[i] * b2 - a2 * d[jj]) / det
            k2 = (a1 * d[jj] - d[i] * b1) / det
            if _feasible(k1, k2, E, d):
                cost = 0.5 * s * (k1 * k1 + k2 * k2) + c1 * k1 + c2 * k2
                if cost < best_cost:
                    best_cost, bk1, bk2, ba1, ba2 = cost, k1, k2, i, jj

    if not math.isfinite(best_cost):
        return 0.0, 0.0, math.inf, QP_NO_CANDIDATE, -1, -1
    return bk1, bk2, best_cost, QP_OPTIMAL, ba1, ba2
