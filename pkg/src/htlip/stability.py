"""Step-to-step stability certificates and parameter-space sweeps.

The closed-loop step map of the error dynamics is Phi * (I + beta K) with
beta = [-1, 0]^T.  Evaluated on the constant-stiffness bound model, its
infinity norm a_dn certifies asymptotic stability whenever a_dn < 1 holds
at every step.  Two equivalent routes are provided: one takes an explicit
closed-loop matrix, the other evaluates the row sums directly from
(fbar, dtau, K); tests hold the two to exact agreement.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dynamics import TransitionMatrix, stm_supremum
from .errors import ValidationError

#: Slack used when turning the strict inequality a_dn < 1 into a boolean.
STABILITY_SLACK = 1e-9


class GainK(NamedTuple):
    """Footstep feedback gain: position gain k1, velocity gain k2 (seconds)."""

    k1: float
    k2: float


@dataclass(frozen=True)
class StabilityReport:
    """Certificate evaluation: row sums, their max, and the verdict."""

    a_dn: float
    row1: float
    row2: float
    stable: bool
    xi: float = float("nan")


def closed_loop_matrix(phi: TransitionMatrix, k: GainK) -> TransitionMatrix:
    """Step map Phi * (I + beta K): the gain subtracts K e from the position."""
    one_m_k1 = 1.0 - k.k1
    return TransitionMatrix(
        one_m_k1 * phi.p11, phi.p12 - k.k2 * phi.p11,
        one_m_k1 * phi.p21, phi.p22 - k.k2 * phi.p21,
    )


def certify_matrix(abar: TransitionMatrix, xi: float = float("nan")) -> StabilityReport:
    """Infinity-norm certificate of a closed-loop step matrix.

    The norm is the maximum absolute row sum; stable means a_dn < 1 with
    STABILITY_SLACK of margin.
    """
    row1 = abs(abar.p11) + abs(abar.p12)
    row2 = abs(abar.p21) + abs(abar.p22)
    a_dn = row1 if row1 >= row2 else row2
    return StabilityReport(a_dn=a_dn, row1=row1, row2=row2,
                           stable=a_dn < 1.0 - STABILITY_SLACK, xi=xi)


def certify_gain(fbar: float, dtau: float, k: GainK) -> StabilityReport:
    """Row-sum certificate evaluated directly from (fbar, dtau, K).

    Writes out both absolute row sums of the bound model's closed-loop
    matrix in terms of cosh/sinh of xi = dtau * sqrt(fbar); agrees exactly
    with certify_matrix over closed_loop_matrix(stm_supremum(...)).
    """
    if fbar <= 0:
        raise ValidationError("fbar must be positive")
    if dtau < 0:
        raise ValidationError("dtau must be nonnegative")
    sq = math.sqrt(fbar)
    xi = dtau * sq
    c = math.cosh(xi)
    s = math.sinh(xi)
    p11 = c
    p12 = s / sq
    p21 = sq * s
    p22 = c
    one_m_k1 = 1.0 - k.k1
    row1 = abs(one_m_k1 * p11) + abs(p12 - k.k2 * p11)
    row2 = abs(one_m_k1 * p21) + abs(p22 - k.k2 * p21)
    a_dn = row1 if row1 >= row2 else row2
    return StabilityReport(a_dn=a_dn, row1=row1, row2=row2,
                           stable=a_dn < 1.0 - STABILITY_SLACK, xi=xi)


def deadbeat_gain(fbar: float, dtau: float) -> GainK:
    """Gain that zeroes the position column of the bound model's step map.

    k1 = 1 cancels the position error outright; k2 = tanh(xi)/sqrt(fbar)
    makes the first row sum vanish, leaving a_dn = 1/cosh(xi).
    """
    sq = math.sqrt(fbar)
    xi = dtau * sq
    return GainK(1.0, math.tanh(xi) / sq)


def sweep_stability_region(fbar_values, dtau_values, k1_values, k2_values):
    """Evaluate the certificate over a (fbar, dtau) x (k1, k2) grid.

    Returns a list of cell dicts, one per (fbar, dtau), each carrying the
    boolean raster over the gain grid and whether any gain certifies.
    """
    fbar_values = np.atleast_1d(np.asarray(fbar_values, dtype=float))
    dtau_values = np.atleast_1d(np.asarray(dtau_values, dtype=float))
    k1_values = np.atleast_1d(np.asarray(k1_values, dtype=float))
    k2_values = np.atleast_1d(np.asarray(k2_values, dtype=float))
    if min(fbar_values.size, dtau_values.size, k1_values.size, k2_values.size) == 0:
        raise ValidationError("sweep ranges must be non-empty")
    k1g, k2g = np.meshgrid(k1_values, k2_values, indexing="ij")
    cells = []
    for fbar in fbar_values:
        sq = math.sqrt(fbar)
        for dtau in dtau_values:
            xi = dtau * sq
            c, s = math.cosh(xi), math.sinh(xi)
            p11, p12, p21, p22 = c, s / sq, sq * s, c
            row1 = np.abs((1.0 - k1g) * p11) + np.abs(p12 - k2g * p11)
            row2 = np.abs((1.0 - k1g) * p21) + np.abs(p22 - k2g * p21)
            a_dn = np.maximum(row1, row2)
            stable = a_dn < 1.0 - STABILITY_SLACK
            cells.append({
                "fbar": float(fbar), "dtau": float(dtau), "xi": xi,
                "k1": k1g, "k2": k2g, "row1": row1, "row2": row2,
                "a_dn": a_dn, "stable": stable,
                "nonempty": bool(stable.any()),
            })
    return cells


def write_sweep_csv(path, cells) -> None:
    """Flatten sweep cells to CSV rows (fbar, dtau, k1, k2, row1, row2, a_dn, stable)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["fbar", "dtau", "k1", "k2", "row1", "row2", "a_dn", "stable"])
        for cell in cells:
            k1 = cell["k1"].ravel()
            k2 = cell["k2"].ravel()
            r1 = cell["row1"].ravel()
            r2 = cell["row2"].ravel()
            a = cell["a_dn"].ravel()
            st = cell["stable"].ravel()
            for i in range(k1.size):
                w.writerow([f"{cell['fbar']:.10g}", f"{cell['dtau']:.10g}",
                            f"{k1[i]:.10g}", f"{k2[i]:.10g}", f"{r1[i]:.10g}",
                            f"{r2[i]:.10g}", f"{a[i]:.10g}", int(st[i])])
