"""
Mean-square correlation figures computed from spectral fourth moments.

The definitions are a reconstruction chosen so that the objective bounds
hold exactly with constants KN and 3KN:

    R_AC^(i)   = (sum_m |a_m^i|^4 + sum_m |b_m^i|^4) / (2N) - 1
    R_CC^(i,k) = (sum_m |a_m^i|^2 |a_m^k|^2 + sum_m |b_m^i|^2 |b_m^k|^2) / (2N)
    R_CC^(i)   = mean over k != i of R_CC^(i,k)   (0 for a single user)

Both follow from ``1/2 <= 1 + cos/2 <= 3/2`` applied termwise to the cost.
"""

from dataclasses import dataclass

import numpy as np

from .basis import TOL_FEAS
from .errors import FeasibilityError
from .objective import check_weights


@dataclass(frozen=True)
class CorrelationMetrics:
    r_ac_per_user: np.ndarray
    r_cc_per_user: np.ndarray
    r_ac: float
    r_cc: float
    r_ac_max: float
    r_cc_max: float


def pairwise_moments(coeffs):
    """``sum_m |a^i|^2 |a^k|^2 + sum_m |b^i|^2 |b^k|^2`` for every user pair, (K, K)."""
    pa = np.abs(np.atleast_2d(coeffs.alpha)) ** 2
    pb = np.abs(np.atleast_2d(coeffs.beta)) ** 2
    return pa @ pa.T + pb @ pb.T


def correlation_metrics(coeffs, tol=TOL_FEAS):
    """Per-user and aggregate mean-square auto/cross correlation."""
    alpha = np.atleast_2d(coeffs.alpha)
    beta = np.atleast_2d(coeffs.beta)
    K, N = alpha.shape
    na = np.sum(np.abs(alpha) ** 2, axis=1)
    nb = np.sum(np.abs(beta) ** 2, axis=1)
    if np.max(np.abs(na - N)) > tol or np.max(np.abs(nb - N)) > tol:
        raise FeasibilityError("coefficient norms must equal N for correlation metrics")

    M = pairwise_moments(coeffs) / (2.0 * N)
    r_ac = np.diag(M) - 1.0
    if K > 1:
        r_cc = (M.sum(axis=1) - np.diag(M)) / (K - 1)
    else:
        r_cc = np.zeros(1)
    return CorrelationMetrics(
        r_ac_per_user=r_ac,
        r_cc_per_user=r_cc,
        r_ac=float(r_ac.mean()),
        r_cc=float(r_cc.mean()),
        r_ac_max=float(r_ac.max()),
        r_cc_max=float(r_cc.max()),
    )


def weight_extremes(Z):
    """``(Z_AC_L, Z_AC_U, Z_CC_L, Z_CC_U)``; the off-diagonal pair is 0 when K = 1."""
    Z = check_weights(Z)
    K = Z.shape[0]
    diag = np.diag(Z)
    if K > 1:
        off = Z[~np.eye(K, dtype=bool)]
        return diag.min(), diag.max(), off.min(), off.max()
    return diag.min(), diag.max(), 0.0, 0.0


def objective_bounds_p1(metrics, Z, N, K):
    """Lower and upper bounds on the total weighted cost."""
    zac_l, zac_u, zcc_l, zcc_u = weight_extremes(Z)
    lower = K * N * (zac_l * (metrics.r_ac + 1) + zcc_l * (K - 1) * metrics.r_cc)
    upper = 3 * K * N * (zac_u * (metrics.r_ac + 1) + zcc_u * (K - 1) * metrics.r_cc)
    return float(lower), float(upper)


def objective_bound_p2(metrics, Z, N, K):
    """Upper bound on the largest per-user cost."""
    _, zac_u, _, zcc_u = weight_extremes(Z)
    return float(3 * N * (zac_u * (metrics.r_ac_max + 1) + zcc_u * (K - 1) * metrics.r_cc_max))
