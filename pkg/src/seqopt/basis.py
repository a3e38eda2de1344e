"""
Shifted Fourier bases and the change-of-basis operators between them.

A length-N sequence is expanded twice, once in the plain Fourier basis
``w_m(0)`` and once in the half-chip shifted basis ``w_m(1/(2N))``:

    s = 1/sqrt(N) * sum_m alpha_m w_m(0) = 1/sqrt(N) * sum_m beta_m w_m(1/(2N))

``phi_hat`` maps alpha to beta and ``phi`` maps beta back. Indices ``m`` and
``n`` run over ``1..N``; array position ``i`` holds index ``m = i + 1``.

Real lifting stacks a complex vector as ``(Re z; Im z)`` and a complex matrix
``M`` as ``[[Re M, -Im M], [Im M, Re M]]`` so that ``lift(M z) = M' lift(z)``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidInstanceError, ShapeError

TOL_LIN = 1e-10
TOL_FEAS = 1e-8


def basis_vector(m, eta, N):
    """Return ``w_m(eta)``, whose n-th entry is ``exp(2 pi j (n-1)(m/N + eta))``."""
    if not 1 <= m <= N:
        raise IndexError(f"basis index m={m} outside 1..{N}")
    n = np.arange(N)
    return np.exp(2j * np.pi * n * (m / N + eta))


def basis_matrix(eta, N):
    """Columns are ``w_1(eta), ..., w_N(eta)``."""
    n = np.arange(N)[:, None]
    m = np.arange(1, N + 1)[None, :]
    return np.exp(2j * np.pi * n * (m / N + eta))


def real_lift_matrix(M):
    """Real 2N x 2N form of a complex N x N matrix."""
    return np.block([[M.real, -M.imag], [M.imag, M.real]])


@dataclass(frozen=True, eq=False)
class BasisOperators:
    """Immutable bundle of the alpha/beta change-of-basis operators for one N."""

    N: int
    phi: np.ndarray
    phi_hat: np.ndarray
    phi_prime: np.ndarray
    phi_hat_prime: np.ndarray
    phi_hat_entries: np.ndarray

    def __post_init__(self):
        for name in ("phi", "phi_hat", "phi_prime", "phi_hat_prime", "phi_hat_entries"):
            getattr(self, name).setflags(write=False)


def shift_angle(N):
    """Matrix of ``2 pi ((n - m)/N - 1/(2N))`` indexed ``[m-1, n-1]``."""
    m = np.arange(1, N + 1)[:, None]
    n = np.arange(1, N + 1)[None, :]
    return 2 * np.pi * ((n - m) / N - 1 / (2 * N))


@lru_cache(maxsize=32)
def build_operators(N):
    """
    Build ``phi``, ``phi_hat`` and their real liftings for length ``N``.

    The results are cached per ``N`` and returned read-only, so they can be
    shared freely.
    """
    N = int(N)
    if N < 2:
        raise InvalidInstanceError(f"sequence length must be >= 2, got N={N}")

    theta = shift_angle(N)
    denom = 1.0 - np.cos(theta)
    # the half-chip offset keeps theta away from multiples of 2 pi
    assert denom.min() >= np.sin(np.pi / (2 * N)) ** 2
    phi_hat_entries = np.sin(theta) / denom

    m = np.arange(1, N + 1)[:, None]
    n = np.arange(1, N + 1)[None, :]
    phi_hat = (2.0 / N) / (1.0 - np.exp(2j * np.pi * ((n - m) / N - 1 / (2 * N))))
    phi = (2.0 / N) / (1.0 - np.exp(2j * np.pi * ((n - m) / N + 1 / (2 * N))))

    return BasisOperators(
        N=N,
        phi=phi,
        phi_hat=phi_hat,
        phi_prime=real_lift_matrix(phi),
        phi_hat_prime=real_lift_matrix(phi_hat),
        phi_hat_entries=phi_hat_entries,
    )


@dataclass
class SpectralCoefficients:
    """alpha/beta coefficients of one or more users (arrays of shape (..., N))."""

    alpha: np.ndarray
    beta: np.ndarray

    @property
    def N(self):
        return self.alpha.shape[-1]

    def check(self, ops=None, tol=TOL_FEAS):
        """Raise ``ValueError`` unless both norms equal N and ``beta = phi_hat alpha``."""
        ops = ops or build_operators(self.N)
        N = self.N
        na = np.sum(np.abs(self.alpha) ** 2, axis=-1)
        nb = np.sum(np.abs(self.beta) ** 2, axis=-1)
        if np.max(np.abs(na - N)) > tol or np.max(np.abs(nb - N)) > tol:
            raise ValueError("coefficient norms differ from N")
        coupled = self.alpha @ ops.phi_hat.T
        if np.max(np.abs(coupled - self.beta)) > tol:
            raise ValueError("beta is not phi_hat @ alpha")


def decompose(s, ops=None):
    """
    Expand sequence(s) ``s`` of shape (N,) or (K, N) in both bases.

    alpha is the projection onto ``w_m(0)``; beta is ``phi_hat @ alpha``.
    """
    s = np.asarray(s, dtype=complex)
    N = s.shape[-1]
    if ops is None:
        ops = build_operators(N)
    elif ops.N != N:
        raise ShapeError(f"sequence length {N} does not match operators for N={ops.N}")
    W0 = basis_matrix(0.0, N)
    alpha = (s @ W0.conj()) / np.sqrt(N)
    beta = alpha @ ops.phi_hat.T
    return SpectralCoefficients(alpha=alpha, beta=beta)


def reconstruct(alpha):
    """Sequence(s) from alpha coefficients, inverse of :func:`decompose`."""
    alpha = np.asarray(alpha, dtype=complex)
    N = alpha.shape[-1]
    return alpha @ basis_matrix(0.0, N).T / np.sqrt(N)


def lift_to_real(coeffs, slack=None):
    """
    Stack K users' coefficients into the flat real decision vector.

    Layout per user is ``(Re alpha, Im alpha, Re beta, Im beta)``, users in
    order, giving length 4NK; when ``slack`` is given it is prepended (4NK+1).
    """
    alpha = np.atleast_2d(coeffs.alpha)
    beta = np.atleast_2d(coeffs.beta)
    if alpha.shape != beta.shape:
        raise ShapeError("alpha and beta must have the same shape")
    blocks = np.stack([alpha.real, alpha.imag, beta.real, beta.imag], axis=1)
    x = blocks.reshape(-1)
    if slack is not None:
        x = np.concatenate([[float(slack)], x])
    return x


def unpack(x, N, K, slack=False):
    """
    Split a flat decision vector into ``(t, a, b)``.

    ``a`` and ``b`` are views of shape (K, 2, N) holding (Re, Im) of alpha and
    beta; ``t`` is ``None`` unless ``slack`` is set.
    """
    x = np.asarray(x, dtype=float)
    expected = 4 * N * K + (1 if slack else 0)
    if x.ndim != 1 or x.size != expected:
        raise ShapeError(f"decision vector has size {x.size}, expected {expected}")
    t = x[0] if slack else None
    blocks = x[1:] if slack else x
    blocks = blocks.reshape(K, 4, N)
    return t, blocks[:, :2, :], blocks[:, 2:, :]


def infer_shape(x, K):
    """Return ``(N, has_slack)`` for a flat vector of K users."""
    size = np.asarray(x).size
    if size % (4 * K) == 0:
        return size // (4 * K), False
    if (size - 1) % (4 * K) == 0 and size > 1:
        return (size - 1) // (4 * K), True
    raise ShapeError(f"vector of size {size} is not 4NK or 4NK+1 for K={K}")


def lower_to_complex(x, N, K, slack=False):
    """Inverse of :func:`lift_to_real`; returns ``(coeffs, t)``."""
    t, a, b = unpack(x, N, K, slack)
    coeffs = SpectralCoefficients(alpha=a[:, 0] + 1j * a[:, 1], beta=b[:, 0] + 1j * b[:, 1])
    return coeffs, t


def pack(a, b, t=None):
    """Flatten (K, 2, N) alpha/beta arrays (and optional slack) into x."""
    blocks = np.concatenate([a, b], axis=1).reshape(-1)
    if t is None:
        return blocks
    return np.concatenate([[float(t)], blocks])


def sequences_from_vector(x, N, K, slack=False):
    """Time-domain sequences (K, N) encoded by a decision vector."""
    coeffs, _ = lower_to_complex(x, N, K, slack)
    return reconstruct(coeffs.alpha)
