# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of htlip._kernels; see that module for the contracts."""

from libc.math cimport cosh, fabs, isfinite, sinh, sqrt

COMPILED = True

QP_OPTIMAL = 0
QP_NO_CANDIDATE = 1

cdef double _FEAS_TOL = 1e-9
cdef double _INF = float("inf")


def rk4_phase(double x, double xd, double[::1] f, double h, int n, acc=None):
    cdef double[::1] a
    cdef double sixth = h / 6.0
    cdef double half = 0.5 * h
    cdef double f0, f1, f2, a0, a1, a2
    cdef double k1x, k1v, k2x, k2v, k3x, k3v, k4x, k4v
    cdef int i, j
    if acc is None:
        for i in range(n):
            j = 2 * i
            f0 = f[j]
            f1 = f[j + 1]
            f2 = f[j + 2]
            k1x = xd
            k1v = f0 * x
            k2x = xd + half * k1v
            k2v = f1 * (x + half * k1x)
            k3x = xd + half * k2v
            k3v = f1 * (x + half * k2x)
            k4x = xd + h * k3v
            k4v = f2 * (x + h * k3x)
            x = x + sixth * (k1x + 2.0 * (k2x + k3x) + k4x)
            xd = xd + sixth * (k1v + 2.0 * (k2v + k3v) + k4v)
    else:
        a = acc
        for i in range(n):
            j = 2 * i
            f0 = f[j]
            f1 = f[j + 1]
            f2 = f[j + 2]
            a0 = a[j]
            a1 = a[j + 1]
            a2 = a[j + 2]
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


def rk4_stm(double[::1] f, double h, int n):
    cdef double p11 = 1.0, p21 = 0.0, p12 = 0.0, p22 = 1.0
    cdef double sixth = h / 6.0
    cdef double half = 0.5 * h
    cdef double f0, f1, f2
    cdef double k1x, k1v, k2x, k2v, k3x, k3v, k4x, k4v
    cdef int i, j
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


def cert_rows(double fbar, double dtau, double k1, double k2):
    cdef double sq = sqrt(fbar)
    cdef double xi = dtau * sq
    cdef double c = cosh(xi)
    cdef double s = sinh(xi)
    cdef double p11 = c, p12 = s / sq, p21 = sq * s, p22 = c
    cdef double row1 = fabs((1.0 - k1) * p11) + fabs(p12 - k2 * p11)
    cdef double row2 = fabs((1.0 - k1) * p21) + fabs(p22 - k2 * p21)
    return row1, row2


cdef bint _feasible(double k1, double k2, double[::1] E, double[::1] d) noexcept:
    cdef int m
    cdef double lhs
    for m in range(6):
        lhs = E[2 * m] * k1 + E[2 * m + 1] * k2
        if lhs > d[m] + _FEAS_TOL * (1.0 + fabs(d[m])):
            return False
    return True


def qp_solve(double s, double c1, double c2, double[::1] E, double[::1] d):
    cdef double best_cost = _INF
    cdef double bk1 = 0.0, bk2 = 0.0
    cdef int ba1 = -1, ba2 = -1
    cdef double u1, u2, e1, e2, nn, t, k1, k2, cost
    cdef double a1, a2, b1, b2, det, scale
    cdef int i, jj, m

    for m in range(6):
        if E[2 * m] == 0.0 and E[2 * m + 1] == 0.0:
            if d[m] < -_FEAS_TOL:
                return 0.0, 0.0, _INF, QP_NO_CANDIDATE, -1, -1

    u1 = -c1 / s
    u2 = -c2 / s
    if _feasible(u1, u2, E, d):
        best_cost = 0.5 * s * (u1 * u1 + u2 * u2) + c1 * u1 + c2 * u2
        bk1 = u1
        bk2 = u2

    for i in range(6):
        e1 = E[2 * i]
        e2 = E[2 * i + 1]
        nn = e1 * e1 + e2 * e2
        if nn <= 0.0:
            continue
        t = (e1 * u1 + e2 * u2 - d[i]) / nn
        k1 = u1 - t * e1
        k2 = u2 - t * e2
        if _feasible(k1, k2, E, d):
            cost = 0.5 * s * (k1 * k1 + k2 * k2) + c1 * k1 + c2 * k2
            if cost < best_cost:
                best_cost = cost
                bk1 = k1
                bk2 = k2
                ba1 = i
                ba2 = -1

    for i in range(6):
        a1 = E[2 * i]
        a2 = E[2 * i + 1]
        for jj in range(i + 1, 6):
            b1 = E[2 * jj]
            b2 = E[2 * jj + 1]
            det = a1 * b2 - a2 * b1
            scale = max(fabs(a1), fabs(a2), fabs(b1), fabs(b2))
            if fabs(det) <= 1e-14 * scale * scale:
                continue
            k1 = (d[i] * b2 - a2 * d[jj]) / det
            k2 = (a1 * d[jj] - d[i] * b1) / det
            if _feasible(k1, k2, E, d):
                cost = 0.5 * s * (k1 * k1 + k2 * k2) + c1 * k1 + c2 * k2
                if cost < best_cost:
                    best_cost = cost
                    bk1 = k1
                    bk2 = k2
                    ba1 = i
                    ba2 = jj

    if not isfinite(best_cost):
        return 0.0, 0.0, _INF, QP_NO_CANDIDATE, -1, -1
    return bk1, bk2, best_cost, QP_OPTIMAL, ba1, ba2
