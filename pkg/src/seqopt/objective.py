"""
Spectral cost terms, objectives, derivatives and SNR figures of merit.

Every cost in the toolkit has the form

    F_W(x) = sum_i sum_k W[i, k] sum_m S_m^{i,k}

with ``S_m^{i,k} = |a_m^i|^2 |a_m^k|^2 c_m + |b_m^i|^2 |b_m^k|^2 d_m``, where
``c_m = 1 + cos(2 pi m/N)/2`` and ``d_m = 1 + cos(2 pi (m/N + 1/(2N)))/2``.
The total objective uses ``W = Z``; the cost of user ``i`` uses the matrix
that keeps only row ``i`` of ``Z``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .basis import build_operators, infer_shape, unpack
from .errors import DegenerateInstanceError, InvalidInstanceError, ShapeError


@lru_cache(maxsize=64)
def cos_weights(N):
    """Return ``(c, d)``, the unshifted and half-shifted ``1 + cos/2`` factors for m=1..N."""
    m = np.arange(1, N + 1)
    c = 1.0 + 0.5 * np.cos(2 * np.pi * m / N)
    d = 1.0 + 0.5 * np.cos(2 * np.pi * (m / N + 1 / (2 * N)))
    c.flags.writeable = False
    d.flags.writeable = False
    return c, d


def check_weights(Z, K=None):
    """Validate a weight matrix and return it as a float array."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
        raise InvalidInstanceError(f"Z must be square, got shape {Z.shape}")
    if K is not None and Z.shape[0] != K:
        raise InvalidInstanceError(f"Z is {Z.shape[0]}x{Z.shape[0]} but K={K}")
    if not np.all(np.isfinite(Z)) or np.any(Z < 0):
        raise InvalidInstanceError("Z entries must be finite and nonnegative")
    return Z


def uniform_weights(K, z_ac, z_cc):
    """Weights treating all users equally: ``z_ac`` on the diagonal, ``z_cc`` elsewhere."""
    Z = np.full((K, K), float(z_cc))
    np.fill_diagonal(Z, float(z_ac))
    return Z


@dataclass(frozen=True)
class SnrParams:
    """AWGN contribution ``N0/(2PT)`` to the SNR denominator."""

    N0_over_2PT: float = 0.0
    include_awgn: bool = False

    def __post_init__(self):
        if self.N0_over_2PT < 0:
            raise InvalidInstanceError("N0_over_2PT must be nonnegative")

    @property
    def noise_term(self):
        return self.N0_over_2PT if self.include_awgn else 0.0


def spectral_powers(x, Z):
    """Squared magnitudes ``(|alpha|^2, |beta|^2)``, each of shape (K, N)."""
    K = np.shape(Z)[0]
    N, slack = infer_shape(x, K)
    _, a, b = unpack(x, N, K, slack)
    return np.sum(a**2, axis=1), np.sum(b**2, axis=1)


def s_term(i, k, m, coeffs):
    """
    ``S_m^{i,k}`` from complex coefficients; ``i``, ``k`` and ``m`` are 1-based.

    ``coeffs`` holds alpha/beta arrays of shape (K, N).
    """
    alpha = np.atleast_2d(coeffs.alpha)
    beta = np.atleast_2d(coeffs.beta)
    K, N = alpha.shape
    if not (1 <= i <= K and 1 <= k <= K and 1 <= m <= N):
        raise IndexError(f"indices (i={i}, k={k}, m={m}) outside K={K}, N={N}")
    c = 1.0 + 0.5 * np.cos(2 * np.pi * m / N)
    d = 1.0 + 0.5 * np.cos(2 * np.pi * (m / N + 1 / (2 * N)))
    ai, ak = abs(alpha[i - 1, m - 1]) ** 2, abs(alpha[k - 1, m - 1]) ** 2
    bi, bk = abs(beta[i - 1, m - 1]) ** 2, abs(beta[k - 1, m - 1]) ** 2
    return ai * ak * c + bi * bk * d


def s_term_real(i, k, m, x, Z):
    """Real-lifted ``S^_m^{i,k}`` read straight off the stacked vector (1-based)."""
    K = np.shape(Z)[0]
    N, slack = infer_shape(x, K)
    _, a, b = unpack(x, N, K, slack)
    c, d = cos_weights(N)
    q = m - 1
    A_i = a[i - 1, 0, q] ** 2 + a[i - 1, 1, q] ** 2
    A_k = a[k - 1, 0, q] ** 2 + a[k - 1, 1, q] ** 2
    B_i = b[i - 1, 0, q] ** 2 + b[i - 1, 1, q] ** 2
    B_k = b[k - 1, 0, q] ** 2 + b[k - 1, 1, q] ** 2
    return A_i * A_k * c[q] + B_i * B_k * d[q]


def pair_sums(pa, pb):
    """``sum_m S_m^{i,k}`` for every pair, shape (K, K)."""
    N = pa.shape[-1]
    c, d = cos_weights(N)
    return (pa * c) @ pa.T + (pb * d) @ pb.T


def per_user_costs(x, Z):
    """Vector of ``sum_k Z[i,k] sum_m S_m^{i,k}`` over users i."""
    Z = check_weights(Z)
    pa, pb = spectral_powers(x, Z)
    return np.sum(Z * pair_sums(pa, pb), axis=1)


def per_user_cost(i, x, Z):
    """Cost of user ``i`` (1-based)."""
    K = np.shape(Z)[0]
    if not 1 <= i <= K:
        raise IndexError(f"user {i} outside 1..{K}")
    return per_user_costs(x, Z)[i - 1]


def objective_p1(x, Z):
    """Total weighted cost, the quantity minimized for the average-SNR design."""
    return float(np.sum(per_user_costs(x, Z)))


def weighted_cost_grad(a, b, W):
    """
    Gradient of ``F_W`` with respect to the real alpha and beta blocks.

    ``a`` and ``b`` have shape (K, 2, N); returns arrays of the same shape.
    Entry ``(p, comp, q)`` is ``2 a[p, comp, q] * c_q * sum_k (W + W^T)[p, k] |a_q^k|^2``.
    """
    N = a.shape[-1]
    c, d = cos_weights(N)
    S = W + W.T
    pa = np.sum(a**2, axis=1)
    pb = np.sum(b**2, axis=1)
    ga = 2.0 * a * (c * (S @ pa))[:, None, :]
    gb = 2.0 * b * (d * (S @ pb))[:, None, :]
    return ga, gb


def weighted_cost_hessian_block(v, w, W):
    """
    Hessian of ``sum_ik W[i,k] sum_q |v_q^i|^2 |v_q^k|^2 w_q`` in v.

    ``v`` has shape (K, 2, N); the result is the dense (2NK, 2NK) matrix in the
    same flattening order.
    """
    K, _, N = v.shape
    S = W + W.T
    pv = np.sum(v**2, axis=1)
    H = np.zeros((K, 2, N, K, 2, N))
    # coupling through the |v|^2 factors of other (or the same) users
    T = 4.0 * np.einsum("pr,pcq,rdq,q->qpcrd", S, v, v, w)
    diag = 2.0 * w * (S @ pv)  # (K, N)
    for p in range(K):
        for comp in range(2):
            T[:, p, comp, p, comp] += diag[p]
    q = np.arange(N)
    H[:, :, q, :, :, q] = T
    return H.reshape(2 * N * K, 2 * N * K)


def grad_objective_p1(x, Z):
    """Analytic gradient of :func:`objective_p1`, flat of length 4NK."""
    Z = check_weights(Z)
    K = Z.shape[0]
    N, slack = infer_shape(x, K)
    if slack:
        raise ShapeError("objective_p1 gradient expects a vector without slack")
    _, a, b = unpack(x, N, K)
    ga, gb = weighted_cost_grad(a, b, Z)
    return np.concatenate([ga, gb], axis=1).reshape(-1)


def tied_beta(u, N, K):
    """Real beta blocks implied by alpha blocks ``u`` (K, 2, N) via ``phi_hat'``."""
    P = build_operators(N).phi_hat_prime
    return (u.reshape(K, 2 * N) @ P.T).reshape(K, 2, N)


def reduced_grad(u, b, W, N, K):
    """Gradient of ``F_W`` with respect to alpha alone (beta tied to alpha)."""
    P = build_operators(N).phi_hat_prime
    ga, gb = weighted_cost_grad(u, b, W)
    return ga.reshape(K, 2 * N) + gb.reshape(K, 2 * N) @ P


def reduced_hessian(u, b, W, N, K):
    """Hessian of ``F_W`` with respect to alpha alone, shape (2NK, 2NK)."""
    P = build_operators(N).phi_hat_prime
    c, d = cos_weights(N)
    Ha = weighted_cost_hessian_block(u, c, W)
    Hb = weighted_cost_hessian_block(b, d, W)
    n = 2 * N
    # beta block of user p is P @ alpha block, so each (p, r) block becomes P^T H_pr P
    Hb = Hb.reshape(K, n, K, n).transpose(0, 2, 1, 3)
    Hb = (P.T @ Hb @ P).transpose(0, 2, 1, 3)
    return Ha + Hb.reshape(K * n, K * n)


def snr_lower_bound(i, x, Z, params=SnrParams()):
    """Worst-case SNR lower bound of user ``i`` (1-based)."""
    N, _ = infer_shape(x, np.shape(Z)[0])
    denom = per_user_cost(i, x, Z) / (6.0 * N**2) + params.noise_term
    if denom <= 0:
        raise DegenerateInstanceError(f"user {i} has zero cost and no noise term")
    return denom**-0.5


def snr_lower_bounds(x, Z, params=SnrParams()):
    """All users' SNR lower bounds as an array."""
    K = np.shape(Z)[0]
    return np.array([snr_lower_bound(i, x, Z, params) for i in range(1, K + 1)])


def average_snr_metric(x, Z, params=SnrParams()):
    """``{sum_i cost_i / (6 N^2 K) + noise}^(-1/2)``."""
    K = np.shape(Z)[0]
    N, _ = infer_shape(x, K)
    denom = objective_p1(x, Z) / (6.0 * N**2 * K) + params.noise_term
    if denom <= 0:
        raise DegenerateInstanceError("objective is zero; average SNR is unbounded")
    return denom**-0.5


def min_snr_metric(x, Z, params=SnrParams()):
    """``{max_i cost_i / (6 N^2) + noise}^(-1/2)``."""
    K = np.shape(Z)[0]
    N, _ = infer_shape(x, K)
    denom = float(np.max(per_user_costs(x, Z))) / (6.0 * N**2) + params.noise_term
    if denom <= 0:
        raise DegenerateInstanceError("all user costs are zero; minimum SNR is unbounded")
    return denom**-0.5
