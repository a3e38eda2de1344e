"""
Lagrange multiplier recovery and first-order optimality residuals.

The stationarity equation is assembled in the full stacked space
``(t?, x_1, ..., x_K)`` from the explicit constraint Jacobians, so it is an
independent check on whatever the solver did internally.

Average-SNR problem::

    grad f + sum_k J_c^(k)^T lambda^(k) + sum_k mu^(k) grad d^(k) = 0

The beta rows fix ``lambda`` in closed form; ``mu`` is the least-squares
scalar over the 2N alpha rows of each user.

Minimum-SNR (epigraph) problem::

    e_t + sum_k J_c^(k)^T lambda^(k) + sum_k mu^(k) grad d^(k) + sum_i nu_i grad e^(i) = 0

with ``nu >= 0`` supported on the active set and ``sum(nu) = 1`` (the t row).
``lambda`` is again closed form given ``nu``; ``(nu, mu)`` minimize the alpha
row residual over that simplex.
"""

from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np

from .basis import TOL_FEAS, build_operators, infer_shape, unpack
from .constraints import feasibility_report, grad_d, grad_e, jacobian_c
from .errors import FeasibilityError, ShapeError
from .objective import check_weights, grad_objective_p1, per_user_costs, weighted_cost_grad

TOL_KKT = 1e-5
ACTIVATION_REL_TOL = 1e-7


@dataclass
class KktMultipliers:
    lambda1: np.ndarray  # (K, N)
    lambda2: np.ndarray  # (K, N)
    mu: np.ndarray  # (K,)
    nu: Optional[np.ndarray] = None  # (K,), epigraph problem only


@dataclass(frozen=True)
class ActiveSet:
    U: frozenset
    activation_tol: float


@dataclass
class KktReport:
    """Residual breakdown; ``residual`` is the max of all components."""

    multipliers: KktMultipliers
    stationarity: float
    sign: float = 0.0
    complementarity: float = 0.0
    simplex: float = 0.0
    active: Optional[ActiveSet] = None
    beta_rows: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def residual(self):
        return max(self.stationarity, self.sign, self.complementarity, self.simplex)


def _require_feasible(x, Z, kind, tol):
    rep = feasibility_report(x, Z, kind)
    if not rep.is_feasible(tol):
        raise FeasibilityError(f"point is not feasible within {tol:g}: {rep}")
    return rep


def _alpha_rows_from_lambda(lam1, lam2, N):
    """
    Contribution of the coupling multipliers to the alpha rows, shape (K, 2, N).

    Row (1, q) is ``-(1/N) sum_m (lambda1_m + lambda2_m phi_mq)`` and row (2, q)
    is ``(1/N) sum_m (lambda1_m phi_mq - lambda2_m)``.
    """
    phi = build_operators(N).phi_hat_entries
    r1 = -(lam1.sum(axis=1)[:, None] + lam2 @ phi) / N
    r2 = (lam1 @ phi - lam2.sum(axis=1)[:, None]) / N
    return np.stack([r1, r2], axis=1)


def _assemble(x, Z, mult, grad_obj, slack):
    """Full-space Lagrangian gradient from explicit constraint derivatives."""
    K = Z.shape[0]
    r = grad_obj.copy()
    for k in range(1, K + 1):
        lam = np.concatenate([mult.lambda1[k - 1], mult.lambda2[k - 1]])
        r += jacobian_c(k, x, K).T @ lam
        r += mult.mu[k - 1] * grad_d(k, x, K)
    if mult.nu is not None:
        for i in range(1, K + 1):
            if mult.nu[i - 1] != 0.0:
                r += mult.nu[i - 1] * grad_e(i, x, Z)
    return r


def _beta_row_norm(r, N, K, slack):
    blocks = (r[1:] if slack else r).reshape(K, 4, N)
    return float(np.max(np.abs(blocks[:, 2:, :])))


def recover_multipliers_p1(x, Z, tol=TOL_FEAS):
    """Closed-form ``lambda`` and least-squares ``mu`` at a feasible point."""
    Z = check_weights(Z)
    K = Z.shape[0]
    N, slack = infer_shape(x, K)
    if slack:
        raise ShapeError("average-SNR multipliers expect a vector without slack")
    _require_feasible(x, Z, "p1", tol)
    _, a, b = unpack(x, N, K)
    ga, gb = weighted_cost_grad(a, b, Z)
    lam1, lam2 = -gb[:, 0], -gb[:, 1]
    rows = ga + _alpha_rows_from_lambda(lam1, lam2, N)
    # rows + 2 mu a = 0 in the least-squares sense, one scalar per user
    mu = -np.sum(rows * a, axis=(1, 2)) / (2.0 * np.sum(a * a, axis=(1, 2)))
    return KktMultipliers(lambda1=lam1, lambda2=lam2, mu=mu)


def kkt_report_p1(x, Z, tol=TOL_FEAS):
    Z = check_weights(Z)
    K = Z.shape[0]
    N, _ = infer_shape(x, K)
    mult = recover_multipliers_p1(x, Z, tol)
    r = _assemble(np.asarray(x, float), Z, mult, grad_objective_p1(x, Z), False)
    return KktReport(
        multipliers=mult,
        stationarity=float(np.max(np.abs(r))),
        beta_rows=_beta_row_norm(r, N, K, False),
    )


def kkt_residual_p1(x, Z, tol=TOL_FEAS):
    """Max-norm stationarity residual at the recovered multipliers."""
    return kkt_report_p1(x, Z, tol).residual


def active_set(x, Z, tol=None):
    """Users whose cost is within ``tol`` of the slack (default ``1e-7 max(1, t)``)."""
    Z = check_weights(Z)
    K = Z.shape[0]
    N, slack = infer_shape(x, K)
    if not slack:
        raise ShapeError("active set needs the slack variable t")
    t = float(np.asarray(x)[0])
    if tol is None:
        tol = ACTIVATION_REL_TOL * max(1.0, abs(t))
    margin = t - per_user_costs(x, Z)
    return ActiveSet(U=frozenset(int(i) + 1 for i in np.flatnonzero(margin <= tol)), activation_tol=tol)


def simplex_least_squares(Q, g=None):
    """
    Minimize ``v^T Q v + 2 g^T v`` over the probability simplex.

    Exact for small problems: every support is tried and the best point that
    is nonnegative wins. Larger problems fall back to projected gradient.
    """
    n = Q.shape[0]
    g = np.zeros(n) if g is None else g
    if n == 0:
        return np.zeros(0)
    if n > 12:
        return _simplex_projected_gradient(Q, g)
    best, best_val = None, np.inf
    for size in range(1, n + 1):
        for support in combinations(range(n), size):
            S = list(support)
            QS = Q[np.ix_(S, S)]
            kkt = np.zeros((size + 1, size + 1))
            kkt[:size, :size] = QS
            kkt[:size, size] = 1.0
            kkt[size, :size] = 1.0
            rhs = np.concatenate([-g[S], [1.0]])
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
            v = np.zeros(n)
            v[S] = sol[:size]
            if v.min() < -1e-12:
                continue
            v = np.clip(v, 0.0, None)
            v /= v.sum()
            val = v @ Q @ v + 2 * g @ v
            if best is None or val < best_val - 1e-15 * max(1.0, abs(best_val)):
                best, best_val = v, val
    return best


def _project_simplex(v):
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = ind[u - css / ind > 0][-1]
    return np.maximum(v - css[rho - 1] / rho, 0.0)


def _simplex_projected_gradient(Q, g, iters=5000):
    n = Q.shape[0]
    v = np.full(n, 1.0 / n)
    step = 1.0 / max(2.0 * np.linalg.norm(Q, 2), 1e-300)
    for _ in range(iters):
        v_new = _project_simplex(v - step * 2.0 * (Q @ v + g))
        if np.max(np.abs(v_new - v)) < 1e-15:
            break
        v = v_new
    return v


def recover_multipliers_p2(x, Z, activation_tol=None, tol=TOL_FEAS):
    """Multipliers at a feasible epigraph point; returns ``(multipliers, active_set)``."""
    Z = check_weights(Z)
    K = Z.shape[0]
    N, slack = infer_shape(x, K)
    if not slack:
        raise ShapeError("minimum-SNR multipliers need the slack variable t")
    _require_feasible(x, Z, "p2", tol)
    _, a, b = unpack(x, N, K, slack)
    act = active_set(x, Z, activation_tol)
    U = sorted(act.U)

    # alpha rows per unit nu_i, with lambda already eliminated through the beta rows
    cols = []
    for i in U:
        W = np.zeros_like(Z)
        W[i - 1] = Z[i - 1]
        ga, gb = weighted_cost_grad(a, b, W)
        cols.append((ga + _alpha_rows_from_lambda(-gb[:, 0], -gb[:, 1], N)).reshape(-1))
    G = np.array(cols).T if cols else np.zeros((2 * N * K, 0))
    D = np.zeros((2 * N * K, K))
    for k in range(K):
        D[k * 2 * N : (k + 1) * 2 * N, k] = 2.0 * a[k].reshape(-1)

    # eliminate mu: project the columns of G onto the complement of span(D)
    Dq, _ = np.linalg.qr(D)
    PG = G - Dq @ (Dq.T @ G)
    nu_U = simplex_least_squares(PG.T @ PG) if U else np.zeros(0)
    nu = np.zeros(K)
    for j, i in enumerate(U):
        nu[i - 1] = nu_U[j]
    mu = np.linalg.lstsq(D, -(G @ nu_U), rcond=None)[0] if U else np.zeros(K)

    W = Z * nu[:, None]
    _, gb = weighted_cost_grad(a, b, W)
    mult = KktMultipliers(lambda1=-gb[:, 0], lambda2=-gb[:, 1], mu=mu, nu=nu)
    return mult, act


def kkt_report_p2(x, Z, activation_tol=None, tol=TOL_FEAS):
    Z = check_weights(Z)
    K = Z.shape[0]
    N, _ = infer_shape(x, K)
    x = np.asarray(x, float)
    mult, act = recover_multipliers_p2(x, Z, activation_tol, tol)
    grad_obj = np.zeros(x.size)
    grad_obj[0] = 1.0
    r = _assemble(x, Z, mult, grad_obj, True)
    t = x[0]
    margin = t - per_user_costs(x, Z)
    nu = mult.nu
    return KktReport(
        multipliers=mult,
        stationarity=float(np.max(np.abs(r))),
        sign=float(max(0.0, -nu.min())),
        complementarity=float(np.max(np.abs(nu * margin))),
        simplex=float(abs(1.0 - nu.sum())) if act.U else 1.0,
        active=act,
        beta_rows=_beta_row_norm(r, N, K, True),
    )


def kkt_residual_p2(x, Z, activation_tol=None, tol=TOL_FEAS):
    """Max-norm KKT residual including sign, complementarity and ``sum(nu) = 1``."""
    return kkt_report_p2(x, Z, activation_tol, tol).residual


def kkt_report(x, Z, kind, tol=TOL_FEAS):
    if kind == "p1":
        return kkt_report_p1(x, Z, tol=tol)
    return kkt_report_p2(x, Z, tol=tol)
