"""
Coupling, power and epigraph constraints with their derivatives.

For user k, with x_k = (a1, a2, b1, b2) the real/imaginary alpha and beta
blocks:

* ``c^(k) = beta' - phi_hat' alpha'``  (2N linear equalities, split c1/c2)
* ``d^(k) = ||alpha'||^2 - N``          (power equality)
* ``e^(i) = cost_i(x) - t``             (epigraph inequality, ``e <= 0``)
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .basis import TOL_FEAS, build_operators, infer_shape, unpack
from .errors import ShapeError
from .objective import check_weights, per_user_costs, weighted_cost_grad


@dataclass(frozen=True)
class FeasibilityReport:
    """Worst norm error ``e1``, worst coupling error ``e2``, smallest epigraph margin ``e3``."""

    e1: float
    e2: float
    e3: Optional[float] = None

    def is_feasible(self, tol=TOL_FEAS):
        ok = self.e1 <= tol and self.e2 <= tol
        if self.e3 is not None:
            ok = ok and self.e3 >= -tol
        return ok


def _user_block(x, k, K):
    N, slack = infer_shape(x, K)
    if not 1 <= k <= K:
        raise IndexError(f"user {k} outside 1..{K}")
    _, a, b = unpack(x, N, K, slack)
    return N, slack, a[k - 1], b[k - 1]


def _offset(k, N, slack):
    return (1 if slack else 0) + 4 * N * (k - 1)


def constraint_c(k, x, K):
    """Coupling residual of user ``k`` as ``(c1_1..c1_N, c2_1..c2_N)``."""
    N, _, a, b = _user_block(x, k, K)
    phi = build_operators(N).phi_hat_entries
    a1, a2 = a
    c1 = b[0] - (np.sum(a1) - phi @ a2) / N
    c2 = b[1] - (phi @ a1 + np.sum(a2)) / N
    return np.concatenate([c1, c2])


def jacobian_c(k, x, K):
    """Jacobian of :func:`constraint_c` with respect to the whole vector, (2N, len(x))."""
    N, slack, _, _ = _user_block(x, k, K)
    phi = build_operators(N).phi_hat_entries
    J = np.zeros((2 * N, np.size(x)))
    o = _offset(k, N, slack)
    eye = np.eye(N)
    J[:N, o : o + N] = -1.0 / N
    J[:N, o + N : o + 2 * N] = phi / N
    J[:N, o + 2 * N : o + 3 * N] = eye
    J[N:, o : o + N] = -phi / N
    J[N:, o + N : o + 2 * N] = -1.0 / N
    J[N:, o + 3 * N : o + 4 * N] = eye
    return J


def constraint_d(k, x, K):
    """Power residual ``||alpha'^(k)||^2 - N``."""
    N, _, a, _ = _user_block(x, k, K)
    return float(np.sum(a**2) - N)


def grad_d(k, x, K):
    """Gradient of :func:`constraint_d`; nonzero only on user k's alpha block."""
    N, slack, a, _ = _user_block(x, k, K)
    g = np.zeros(np.size(x))
    o = _offset(k, N, slack)
    g[o : o + 2 * N] = 2.0 * a.reshape(-1)
    return g


def _row_weights(i, Z):
    W = np.zeros_like(Z)
    W[i - 1] = Z[i - 1]
    return W


def constraint_e(i, x, Z):
    """Epigraph residual ``cost_i - t`` of user ``i``; ``x`` must carry the slack."""
    Z = check_weights(Z)
    K = Z.shape[0]
    N, slack = infer_shape(x, K)
    if not slack:
        raise ShapeError("constraint e needs a vector with the slack variable t")
    if not 1 <= i <= K:
        raise IndexError(f"user {i} outside 1..{K}")
    return float(per_user_costs(x, Z)[i - 1] - np.asarray(x)[0])


def grad_e(i, x, Z):
    """
    Gradient of :func:`constraint_e` over ``(t, x_1, ..., x_K)``.

    For user p != i the alpha entries are ``2 a_q^p Z[i,p] A_q^i``; for p == i
    they are ``2 a_q^i (Z[i,i] A_q^i + sum_k Z[i,k] A_q^k)``, which collapses to
    the doubled diagonal term when Z has no off-diagonal weight.
    """
    Z = check_weights(Z)
    K = Z.shape[0]
    N, slack = infer_shape(x, K)
    if not slack:
        raise ShapeError("constraint e needs a vector with the slack variable t")
    _, a, b = unpack(x, N, K, slack)
    ga, gb = weighted_cost_grad(a, b, _row_weights(i, Z))
    return np.concatenate([[-1.0], np.concatenate([ga, gb], axis=1).reshape(-1)])


def feasibility_report(x, Z, kind="p1"):
    """Feasibility errors of a full stacked vector (``kind`` is ``"p1"`` or ``"p2"``)."""
    Z = check_weights(Z)
    K = Z.shape[0]
    N, slack = infer_shape(x, K)
    if kind == "p2" and not slack:
        raise ShapeError("a p2 report needs the slack variable t")
    t, a, b = unpack(x, N, K, slack)
    P = build_operators(N).phi_hat_prime
    na = np.sum(a**2, axis=(1, 2))
    nb = np.sum(b**2, axis=(1, 2))
    e1 = float(np.max(np.maximum(np.abs(N - na), np.abs(N - nb))))
    coupled = a.reshape(K, 2 * N) @ P.T
    e2 = float(np.max(np.abs(b.reshape(K, 2 * N) - coupled)))
    e3 = None
    if kind == "p2":
        e3 = float(np.min(t - per_user_costs(x, Z)))
    return FeasibilityReport(e1=e1, e2=e2, e3=e3)
