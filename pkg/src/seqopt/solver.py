"""
Local solvers for the average-SNR ("p1") and minimum-SNR ("p2") designs.

Both problems are solved by a line-search SQP method:

* the QP model uses the exact Hessian of the Lagrangian, made positive
  definite by adding ``rho * A^T A`` (which leaves the Newton step on the
  constraint manifold unchanged) and, only if needed, a diagonal shift or an
  eigenvalue flip;
* the QP is solved through its dual, a tiny bound-constrained problem in the
  multipliers (one per constraint);
* steps are accepted on the l1 merit function; candidates include the
  renormalisation onto the power spheres and, for p2, the tightened slack
  and a second-order correction of the active epigraph rows.

The default ``eliminated`` parameterisation optimises alpha' (and t) only,
with beta' = phi_hat' alpha' substituted, so the coupling error is zero by
construction. ``full`` keeps all 4NK variables and the explicit coupling
equalities.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .basis import build_operators, lower_to_complex, pack, unpack
from .constraints import FeasibilityReport, feasibility_report
from .errors import DegenerateInstanceError, FeasibilityError, InvalidInstanceError, ShapeError
from .kkt import kkt_report
from .metrics import CorrelationMetrics, correlation_metrics
from .objective import (
    average_snr_metric,
    check_weights,
    min_snr_metric,
    objective_p1,
    pair_sums,
    per_user_costs,
    reduced_grad,
    reduced_hessian,
    tied_beta,
    uniform_weights,
    weighted_cost_grad,
    weighted_cost_hessian_block,
    cos_weights,
)

log = logging.getLogger(__name__)

KINDS = ("p1", "p2")
PARAMETERIZATIONS = ("eliminated", "full")
STABILIZE_BELOW = 1e-2  # KKT residual below which multipliers are stabilised
EXTRAPOLATE = 10  # at most 2**10 times the model step
POLISH = 5  # extra steps allowed to reach the absolute stationarity target
SHIFTS = (1e-5, 1e-3)  # diagonal shifts (relative to max|H|) tried before the eigenvalue flip


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    N: int
    K: int
    Z: np.ndarray
    kind: str = "p1"

    def __post_init__(self):
        if self.N < 2 or self.K < 1:
            raise InvalidInstanceError(f"need N >= 2 and K >= 1, got N={self.N}, K={self.K}")
        if self.kind not in KINDS:
            raise InvalidInstanceError(f"unknown problem kind {self.kind!r}")
        object.__setattr__(self, "Z", check_weights(self.Z, self.K))

    @classmethod
    def uniform(cls, N, K, z_ac, z_cc, kind="p1"):
        return cls(N=N, K=K, Z=uniform_weights(K, z_ac, z_cc), kind=kind)

    @property
    def has_slack(self):
        return self.kind == "p2"

    @property
    def dimension(self):
        return 4 * self.N * self.K + (1 if self.has_slack else 0)


@dataclass(frozen=True)
class SolverConfig:
    # minimax runs with all users active can crawl for ~1000 iterations
    max_iterations: int = 2000
    constraint_tol: float = 1e-9
    stationarity_tol: float = 1e-6
    starts: int = 1
    seed: int = 0
    parameterization: str = "eliminated"

    def __post_init__(self):
        if self.starts < 1:
            raise InvalidInstanceError("starts must be >= 1")
        if self.constraint_tol <= 0 or self.stationarity_tol <= 0:
            raise InvalidInstanceError("tolerances must be positive")
        if self.max_iterations < 1:
            raise InvalidInstanceError("max_iterations must be >= 1")
        if self.parameterization not in PARAMETERIZATIONS:
            raise InvalidInstanceError(f"unknown parameterization {self.parameterization!r}")


@dataclass
class SolveReport:
    x: np.ndarray
    objective: float
    feasibility: FeasibilityReport
    metrics: Optional[CorrelationMetrics]
    ave_snr: float
    min_snr: float
    kkt_residual: float
    trial_id: int = 0
    iterations: int = 0
    converged: bool = False
    status: str = ""
    start_objective: float = float("nan")
    stationarity: float = float("nan")
    best: bool = False
    extras: dict = field(default_factory=dict)


# ----------------------------------------------------------------------------
# problem formulations


class _Eliminated:
    """Variables ``(t?, alpha'_1, ..., alpha'_K)``; beta' is substituted."""

    def __init__(self, inst):
        self.inst = inst
        self.N, self.K, self.Z = inst.N, inst.K, inst.Z
        self.slack = inst.has_slack
        self.off = 1 if self.slack else 0
        self.n = 2 * self.N * self.K + self.off
        self.n_eq = self.K
        self.n_in = self.K if self.slack else 0
        self._rows = [self._row_weights(i) for i in range(self.K)]
        self.stabilize = None  # every multiplier row is stabilised
        self.rho_steps = 3

    def _row_weights(self, i):
        W = np.zeros_like(self.Z)
        W[i] = self.Z[i]
        return W

    def from_full(self, x):
        t, a, _ = unpack(x, self.N, self.K, self.slack)
        u = a.reshape(-1)
        return np.concatenate([[t], u]) if self.slack else u.copy()

    def to_full(self, z):
        u = self.u(z)
        b = tied_beta(u, self.N, self.K)
        return pack(u, b, z[0] if self.slack else None)

    def u(self, z):
        return z[self.off :].reshape(self.K, 2, self.N)

    def _costs(self, z):
        u = self.u(z)
        b = tied_beta(u, self.N, self.K)
        pa, pb = np.sum(u**2, axis=1), np.sum(b**2, axis=1)
        return np.sum(self.Z * pair_sums(pa, pb), axis=1)

    def fun(self, z):
        if self.slack:
            return float(z[0])
        return float(np.sum(self._costs(z)))

    def grad(self, z):
        if self.slack:
            g = np.zeros(self.n)
            g[0] = 1.0
            return g
        u = self.u(z)
        b = tied_beta(u, self.N, self.K)
        return reduced_grad(u, b, self.Z, self.N, self.K).reshape(-1)

    def eq(self, z):
        return np.sum(self.u(z) ** 2, axis=(1, 2)) - self.N

    def eq_jac(self, z):
        u = self.u(z).reshape(self.K, 2 * self.N)
        J = np.zeros((self.K, self.n))
        for k in range(self.K):
            s = self.off + 2 * self.N * k
            J[k, s : s + 2 * self.N] = 2.0 * u[k]
        return J

    def ineq(self, z):
        if not self.slack:
            return np.zeros(0)
        return self._costs(z) - z[0]

    def ineq_jac(self, z):
        if not self.slack:
            return np.zeros((0, self.n))
        u = self.u(z)
        b = tied_beta(u, self.N, self.K)
        J = np.zeros((self.K, self.n))
        J[:, 0] = -1.0
        for i in range(self.K):
            J[i, 1:] = reduced_grad(u, b, self._rows[i], self.N, self.K).reshape(-1)
        return J

    def hess(self, z, y_eq, y_in):
        u = self.u(z)
        b = tied_beta(u, self.N, self.K)
        W = self.Z * y_in[:, None] if self.slack else self.Z
        Hu = reduced_hessian(u, b, W, self.N, self.K)
        Hu[np.diag_indices_from(Hu)] += 2.0 * np.repeat(y_eq, 2 * self.N)
        if not self.slack:
            return Hu
        H = np.zeros((self.n, self.n))
        H[1:, 1:] = Hu
        return H

    def gauge(self, z):
        """Unit tangents of the per-user phase rotations, columns of an (n, K) matrix."""
        u = self.u(z)
        rot = np.stack([-u[:, 1], u[:, 0]], axis=1)
        V = np.zeros((self.n, self.K))
        for k in range(self.K):
            s = self.off + 2 * self.N * k
            V[s : s + 2 * self.N, k] = rot[k].reshape(-1)
        return V / np.maximum(np.linalg.norm(V, axis=0), 1e-300)

    def retract(self, z):
        z = z.copy()
        u = self.u(z)
        norms = np.sqrt(np.sum(u**2, axis=(1, 2)))
        if np.any(norms == 0) or not np.all(np.isfinite(norms)):
            return z
        z[self.off :] = (u * (np.sqrt(self.N) / norms)[:, None, None]).reshape(-1)
        return z

    def finalize(self, z):
        z = self.retract(z)
        if self.slack:
            z[0] = float(np.max(self._costs(z)))
        return z


class _Full(_Eliminated):
    """All ``4NK`` (+t) variables with explicit coupling equalities."""

    def __init__(self, inst):
        super().__init__(inst)
        self.n = 4 * self.N * self.K + self.off
        self.n_eq = self.K * (2 * self.N + 1)
        self.P = build_operators(self.N).phi_hat_prime
        # the linear coupling rows always have full rank; only the sphere and
        # epigraph multipliers need stabilising
        self.stabilize = np.concatenate([np.zeros(2 * self.N * self.K), np.ones(self.K + self.n_in)])
        # negative curvature along the coupling rows needs a large rho to be removed
        self.rho_steps = 7

    def from_full(self, x):
        return np.asarray(x, dtype=float).copy()

    def to_full(self, z):
        return z.copy()

    def _ab(self, z):
        _, a, b = unpack(z, self.N, self.K, self.slack)
        return a, b

    def u(self, z):
        return self._ab(z)[0]

    def _costs(self, z):
        a, b = self._ab(z)
        pa, pb = np.sum(a**2, axis=1), np.sum(b**2, axis=1)
        return np.sum(self.Z * pair_sums(pa, pb), axis=1)

    def _flat_grad(self, W, z):
        a, b = self._ab(z)
        ga, gb = weighted_cost_grad(a, b, W)
        return np.concatenate([ga, gb], axis=1).reshape(-1)

    def grad(self, z):
        if self.slack:
            return super().grad(z)
        return self._flat_grad(self.Z, z)

    def eq(self, z):
        a, b = self._ab(z)
        n2 = 2 * self.N
        c = b.reshape(self.K, n2) - a.reshape(self.K, n2) @ self.P.T
        d = np.sum(a**2, axis=(1, 2)) - self.N
        return np.concatenate([c.reshape(-1), d])

    def eq_jac(self, z):
        a, _ = self._ab(z)
        n2 = 2 * self.N
        J = np.zeros((self.n_eq, self.n))
        for k in range(self.K):
            s = self.off + 4 * self.N * k
            rows = slice(k * n2, (k + 1) * n2)
            J[rows, s : s + n2] = -self.P
            J[rows, s + n2 : s + 2 * n2] = np.eye(n2)
            J[self.K * n2 + k, s : s + n2] = 2.0 * a[k].reshape(-1)
        return J

    def ineq_jac(self, z):
        if not self.slack:
            return np.zeros((0, self.n))
        J = np.zeros((self.K, self.n))
        J[:, 0] = -1.0
        for i in range(self.K):
            J[i, 1:] = self._flat_grad(self._rows[i], z)
        return J

    def hess(self, z, y_eq, y_in):
        a, b = self._ab(z)
        c, d = cos_weights(self.N)
        W = self.Z * y_in[:, None] if self.slack else self.Z
        K, n2 = self.K, 2 * self.N
        Ha = weighted_cost_hessian_block(a, c, W).reshape(K, n2, K, n2)
        Hb = weighted_cost_hessian_block(b, d, W).reshape(K, n2, K, n2)
        H4 = np.zeros((K, 2, n2, K, 2, n2))
        H4[:, 0, :, :, 0, :] = Ha
        H4[:, 1, :, :, 1, :] = Hb
        mu = y_eq[K * n2 :]
        for k in range(K):
            H4[k, 0, :, k, 0, :] += 2.0 * mu[k] * np.eye(n2)
        Hx = H4.reshape(4 * self.N * K, 4 * self.N * K)
        if not self.slack:
            return Hx
        H = np.zeros((self.n, self.n))
        H[1:, 1:] = Hx
        return H

    def gauge(self, z):
        a, b = self._ab(z)
        V = np.zeros((self.n, self.K))
        n2 = 2 * self.N
        for k in range(self.K):
            s = self.off + 4 * self.N * k
            V[s : s + n2, k] = np.concatenate([-a[k, 1], a[k, 0]])
            V[s + n2 : s + 2 * n2, k] = np.concatenate([-b[k, 1], b[k, 0]])
        return V / np.maximum(np.linalg.norm(V, axis=0), 1e-300)

    def retract(self, z):
        z = z.copy()
        a, _ = self._ab(z)
        norms = np.sqrt(np.sum(a**2, axis=(1, 2)))
        if np.any(norms == 0) or not np.all(np.isfinite(norms)):
            return z
        a = a * (np.sqrt(self.N) / norms)[:, None, None]
        b = tied_beta(a, self.N, self.K)
        t = z[0] if self.slack else None
        return pack(a, b, t)


# ----------------------------------------------------------------------------
# SQP machinery


def bounded_qp(M, q, bounded, tol=1e-13, max_iter=200):
    """
    Minimise ``y^T M y / 2 + q^T y`` subject to ``y[j] >= 0`` for bounded j.

    Primal active-set method started from ``y = 0``; ``M`` is symmetric
    positive semidefinite and small (one row per constraint).
    """
    m = q.size
    y = np.zeros(m)
    fixed = np.array(bounded, dtype=bool)
    scale = max(1.0, float(np.max(np.abs(q))) if m else 1.0)
    for _ in range(max_iter):
        F = ~fixed
        cand = np.zeros(m)
        if F.any():
            cand[F] = np.linalg.lstsq(M[np.ix_(F, F)], -q[F], rcond=None)[0]
        bad = F & bounded & (cand < 0)
        if not bad.any():
            y = cand
            grad = M @ y + q
            W = fixed & bounded
            if not W.any() or grad[W].min() >= -tol * scale:
                return y
            j = np.flatnonzero(W)[np.argmin(grad[W])]
            fixed[j] = False
            continue
        idx = np.flatnonzero(bad)
        ratios = y[idx] / (y[idx] - cand[idx])
        r = int(np.argmin(ratios))
        y = y + ratios[r] * (cand - y)
        y[idx[r]] = 0.0
        fixed[idx[r]] = True
    return y


def _convexify(H, A, rho_steps=3):
    """
    Positive definite model Hessian and its Cholesky factor.

    ``H + rho A^T A`` is tried first since it yields the exact Newton step on
    the linearised constraints; if no tried ``rho`` works the reduced curvature
    is indefinite and the eigenvalues are replaced by their absolute values.
    ``rho`` runs over 0 and ``rho_steps`` decades starting at ``max|H| / max|A^T A|``.
    """
    scale = max(1.0, float(np.max(np.abs(H))))
    AtA = A.T @ A if A.size else np.zeros_like(H)
    base = scale / max(float(np.max(np.abs(AtA))) if A.size else 1.0, 1e-300)
    for rho in (0.0,) + tuple(base * 10.0**j for j in range(rho_steps)):
        try:
            B = H + rho * AtA
            return cho_factor(B), B
        except LinAlgError:
            continue
    # slightly indefinite (typical near a degenerate minimiser): a small shift is enough
    for tau in SHIFTS:
        try:
            B = H + 10 * base * AtA
            B[np.diag_indices_from(B)] += tau * scale
            return cho_factor(B), B
        except LinAlgError:
            continue
    w, V = np.linalg.eigh(H + 10 * base * AtA)
    w = np.maximum(np.abs(w), 1e-5 * scale)
    B = (V * w) @ V.T
    B = 0.5 * (B + B.T)
    return cho_factor(B), B


def _solve_qp(cf, g, Je, h, Ji, gi, sigma=0.0, y_prev=None, stabilize=None):
    """
    Step and multipliers of ``min p'Bp/2 + g'p  s.t.  Je p + h = 0, Ji p + gi <= 0``.

    With ``sigma > 0`` the constraints are relaxed to ``... = sigma (y - y_prev)``
    (stabilised SQP), which keeps the multipliers unique and close to
    ``y_prev`` when the active gradients are linearly dependent. ``stabilize``
    masks the rows that get the relaxation (default all).
    """
    A = np.vstack([Je, Ji])
    c0 = np.concatenate([h, gi])
    Bg = cho_solve(cf, g)
    BA = cho_solve(cf, A.T)
    M = A @ BA
    M = 0.5 * (M + M.T)
    q = A @ Bg - c0
    if sigma > 0:
        s = sigma * (np.ones(q.size) if stabilize is None else stabilize)
        M[np.diag_indices_from(M)] += s
        q = q - s * y_prev
    bounded = np.concatenate([np.zeros(h.size, bool), np.ones(gi.size, bool)])
    y = bounded_qp(M, q, bounded)
    p = -(Bg + BA @ y)
    return p, y[: h.size], y[h.size :]


def _correction(cf, A, c):
    """Least-change (in the model metric) step ``d`` with ``A d = -c``."""
    BA = cho_solve(cf, A.T)
    return -BA @ np.linalg.lstsq(A @ BA, c, rcond=None)[0]


@dataclass
class _SqpResult:
    z: np.ndarray
    iterations: int
    converged: bool
    status: str
    stationarity: float


def _sqp(prob, z0, cfg):
    z = z0.astype(float).copy()
    y_e = np.zeros(prob.n_eq)
    y_i = np.zeros(prob.n_in)
    penalty = 1.0
    eps = np.finfo(float).eps
    stat = np.inf
    polish = 0

    def violation(h, gi):
        return float(np.sum(np.abs(h)) + np.sum(np.maximum(gi, 0.0)))

    def merit_at(z, p, step, correct=False):
        # raw step, sphere retraction and (p2) tightened slack; keep the best
        trial = z + step * p
        cands = [trial, prob.retract(trial)]
        if prob.slack:
            cands.append(prob.finalize(trial))
            if correct:
                # second-order correction: restore the QP-active epigraph rows
                cf, rows = soc
                c = np.concatenate([prob.eq(trial), prob.ineq(trial)[rows]])
                A = np.vstack([prob.eq_jac(trial), prob.ineq_jac(trial)[rows]])
                cands.append(prob.finalize(trial + _correction(cf, A, c)))
        best = None
        for cand in cands:
            fc = prob.fun(cand)
            hc, gc = prob.eq(cand), prob.ineq(cand)
            phic = fc + penalty * violation(hc, gc)
            if np.isfinite(phic) and (best is None or phic < best[0]):
                best = (phic, (cand, fc, hc, gc))
        return best

    def line_search(z, p, phi0, slope, fuzz):
        def ok(best, step):
            return best is not None and best[0] <= phi0 + 1e-4 * step * slope + fuzz

        step = 1.0
        while step > 1e-12:
            best = merit_at(z, p, step)
            if ok(best, step):
                break
            if soc is not None:
                # step rejected: try the second-order correction
                best = merit_at(z, p, step, correct=True)
                if ok(best, step):
                    break
            step *= 0.5
        else:
            return None, 0.0
        if step == 1.0:
            # flat valleys make the model step too short: extend while the merit keeps falling
            while step < 2.0**EXTRAPOLATE:
                longer = merit_at(z, p, 2.0 * step)
                if longer is None or longer[0] >= best[0]:
                    break
                step, best = 2.0 * step, longer
        return best, step

    f = prob.fun(z)
    h, gi = prob.eq(z), prob.ineq(z)
    for it in range(1, cfg.max_iterations + 1):
        g = prob.grad(z)
        Je, Ji = prob.eq_jac(z), prob.ineq_jac(z)
        H = prob.hess(z, y_e, y_i)
        # phase rotations leave every cost unchanged: pin the flat directions
        V = prob.gauge(z)
        H = H + max(1.0, float(np.max(np.abs(H)))) * (V @ V.T)
        act = Ji[(gi > -1e-6 * max(1.0, abs(f))) | (y_i > 0)] if prob.n_in else Ji
        # local phase: stabilise the multipliers once the KKT residual is small
        rho = max(
            float(np.max(np.abs(g + Je.T @ y_e + Ji.T @ y_i))),
            float(np.max(np.abs(h), initial=0.0)),
            float(np.max(np.abs(np.minimum(-gi, y_i)), initial=0.0)),
        )
        sigmas = (rho, 0.0) if rho < STABILIZE_BELOW else (0.0,)
        y_prev = np.concatenate([y_e, y_i])
        feas = max(float(np.max(np.abs(h))) if h.size else 0.0, float(np.max(gi, initial=0.0)))
        try:
            cf, _ = _convexify(H, np.vstack([Je, act]), prob.rho_steps)
        except (LinAlgError, ValueError):
            return _SqpResult(z, it, False, "failed: singular model", stat)

        accepted = None
        for sigma in sigmas:
            try:
                p, ye_new, yi_new = _solve_qp(cf, g, Je, h, Ji, gi, sigma, y_prev, prob.stabilize)
            except (LinAlgError, ValueError):
                return _SqpResult(z, it, False, "failed: singular model", stat)
            if not np.all(np.isfinite(p)):
                return _SqpResult(z, it, False, "failed: non-finite step", stat)

            # stationarity relative to the multiplier scale, so that the test
            # is invariant under rescaling Z
            ymax = float(np.max(np.abs(np.concatenate([ye_new, yi_new])), initial=0.0))
            resid = float(np.max(np.abs(g + Je.T @ ye_new + Ji.T @ yi_new)))
            stat = resid / max(1.0, ymax)
            comp = float(np.max(np.abs(yi_new * gi), initial=0.0))
            if stat <= cfg.stationarity_tol and feas <= cfg.constraint_tol and comp <= cfg.stationarity_tol:
                # a few more Newton steps usually bring the absolute residual down too
                if resid <= cfg.stationarity_tol or polish >= POLISH:
                    return _SqpResult(z, it - 1, True, "converged", stat)
                polish += 1

            if penalty < 1.1 * ymax:
                penalty = 2.0 * ymax
            phi0 = f + penalty * violation(h, gi)
            slope = float(g @ p) - penalty * violation(h, gi)
            fuzz = 10 * eps * max(1.0, abs(phi0))
            soc = (cf, yi_new > 0) if prob.slack and np.any(yi_new > 0) else None
            accepted, step = line_search(z, p, phi0, slope, fuzz)
            # a stabilised step that needs backtracking is not trusted
            if accepted is not None and (sigma == 0.0 or step >= 1.0):
                break
        if accepted is None:
            if polish:
                return _SqpResult(z, it - 1, True, "converged", stat)
            return _SqpResult(z, it, False, "line search failed", stat)
        y_e, y_i = ye_new, yi_new
        z, f, h, gi = accepted[1]
    if polish:
        return _SqpResult(z, cfg.max_iterations, True, "converged", stat)
    return _SqpResult(z, cfg.max_iterations, False, "iteration limit", stat)


# ----------------------------------------------------------------------------
# public API


def random_feasible_start(instance, rng):
    """
    Random feasible full vector: alpha' uniform on the radius-sqrt(N) sphere,
    beta' = phi_hat' alpha', and t at the largest user cost.
    """
    N, K = instance.N, instance.K
    g = rng.standard_normal((K, 2 * N))
    a = g * (np.sqrt(N) / np.linalg.norm(g, axis=1))[:, None]
    a = a.reshape(K, 2, N)
    b = tied_beta(a, N, K)
    x = pack(a, b)
    if instance.has_slack:
        t = float(np.max(per_user_costs(x, instance.Z)))
        x = pack(a, b, t)
    return x


def trial_rng(seed, trial_id):
    """Independent generator for one trial, a pure function of ``(seed, trial_id)``."""
    return np.random.default_rng([int(seed), int(trial_id)])


def _objective_value(inst, x):
    if inst.has_slack:
        return float(x[0])
    return objective_p1(x, inst.Z)


def _safe(fn, *args):
    try:
        return float(fn(*args))
    except DegenerateInstanceError:
        return float("inf")


def build_report(inst, x, trial_id=0, iterations=0, converged=False, status="", start_objective=float("nan"), stationarity=float("nan")):
    """Evaluate feasibility, correlation, SNR and KKT figures of a full vector."""
    N, K, Z = inst.N, inst.K, inst.Z
    feas = feasibility_report(x, Z, inst.kind)
    coeffs, _ = lower_to_complex(x, N, K, inst.has_slack)
    try:
        metrics = correlation_metrics(coeffs)
    except FeasibilityError:
        metrics = None
    try:
        kkt = kkt_report(x, Z, inst.kind).residual
    except FeasibilityError:
        kkt = float("nan")
    return SolveReport(
        x=x,
        objective=_objective_value(inst, x),
        feasibility=feas,
        metrics=metrics,
        ave_snr=_safe(average_snr_metric, x, Z),
        min_snr=_safe(min_snr_metric, x, Z),
        kkt_residual=kkt,
        trial_id=trial_id,
        iterations=iterations,
        converged=converged,
        status=status,
        start_objective=start_objective,
        stationarity=stationarity,
    )


def solve(instance, config=SolverConfig(), start=None, trial_id=0):
    """
    Locally solve ``instance`` from ``start`` (a full feasible vector).

    Never raises for numerical trouble: the report carries ``converged=False``
    and a status message instead.
    """
    inst = instance
    if start is None:
        start = random_feasible_start(inst, trial_rng(config.seed, trial_id))
    start = np.asarray(start, dtype=float)
    if start.ndim != 1 or start.size != inst.dimension:
        raise ShapeError(f"start has size {start.size}, expected {inst.dimension}")
    f0 = _objective_value(inst, start)

    if not np.any(inst.Z):
        return build_report(inst, start.copy(), trial_id, 0, True, "zero weights", f0, 0.0)

    prob = _Full(inst) if config.parameterization == "full" else _Eliminated(inst)
    with np.errstate(over="raise", invalid="raise"):
        try:
            res = _sqp(prob, prob.from_full(start), config)
            z = prob.finalize(res.z)
        except FloatingPointError as exc:
            return build_report(inst, start.copy(), trial_id, 0, False, f"failed: {exc}", f0)
    x = prob.to_full(z)
    rep = build_report(inst, x, trial_id, res.iterations, False, res.status, f0, res.stationarity)
    feas_ok = rep.feasibility.is_feasible(config.constraint_tol)
    monotone = rep.objective <= f0 + config.constraint_tol
    rep.converged = bool(res.converged and feas_ok and monotone)
    if res.converged and not rep.converged:
        rep.status = "converged point rejected: " + ("infeasible" if not feas_ok else "objective rose")
    log.debug("trial %d: %s after %d iterations", trial_id, rep.status, rep.iterations)
    return rep


def _run_trial(args):
    inst, config, trial_id = args
    try:
        start = random_feasible_start(inst, trial_rng(config.seed, trial_id))
        return solve(inst, config, start, trial_id)
    except Exception as exc:  # a bad trial never aborts the batch
        nan = float("nan")
        return SolveReport(
            x=np.full(inst.dimension, nan),
            objective=nan,
            feasibility=FeasibilityReport(nan, nan, nan if inst.has_slack else None),
            metrics=None,
            ave_snr=nan,
            min_snr=nan,
            kkt_residual=nan,
            trial_id=trial_id,
            status=f"failed: {exc!r}",
        )


def thread_count():
    """Worker count from ``SEQOPT_THREADS`` (unset -> 1, 0 -> all cores)."""
    raw = os.environ.get("SEQOPT_THREADS", "1").strip() or "1"
    n = int(raw)
    return (os.cpu_count() or 1) if n <= 0 else n


def best_trial(reports, kind):
    """Index of the converged report with the highest SNR figure, or None."""
    key = "min_snr" if kind == "p2" else "ave_snr"
    best, best_val = None, -np.inf
    for idx, rep in enumerate(reports):
        val = getattr(rep, key)
        if rep.converged and np.isfinite(val) and val > best_val:
            best, best_val = idx, val
    return best


def multi_start(instance, config=SolverConfig(), workers=None):
    """Run ``config.starts`` trials; reports are ordered by trial id and the best is flagged."""
    workers = thread_count() if workers is None else workers
    jobs = [(instance, config, t) for t in range(config.starts)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_trial, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        reports = [_run_trial(j) for j in jobs]
    reports.sort(key=lambda r: r.trial_id)
    idx = best_trial(reports, instance.kind)
    if idx is not None:
        reports[idx].best = True
    return reports


__all__ = [
    "ProblemInstance",
    "SolverConfig",
    "SolveReport",
    "random_feasible_start",
    "solve",
    "multi_start",
    "build_report",
    "best_trial",
    "trial_rng",
]
