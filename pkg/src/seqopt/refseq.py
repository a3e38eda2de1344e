"""
Reference spreading-sequence families: Gold codes, Frank-Zadoff-Chu chirps
and Sarwate's single-carrier sequences.

Every generator returns a complex (K, N) array so that all families flow
through the same decomposition and metrics pipeline.
"""

from dataclasses import dataclass, field
from math import gcd
from typing import Optional

import numpy as np

from .errors import InvalidInstanceError

FAMILIES = ("gold", "fzc", "sarwate")

# Preferred pairs of primitive polynomials, as exponent tuples (constant term
# included); each pair is re-verified by brute force before use.
PREFERRED_PAIRS = {
    3: ((3, 1, 0), (3, 2, 0)),
    5: ((5, 2, 0), (5, 4, 3, 2, 0)),
    6: ((6, 1, 0), (6, 5, 2, 1, 0)),
    7: ((7, 3, 0), (7, 3, 2, 1, 0)),
    9: ((9, 4, 0), (9, 6, 4, 3, 0)),
    10: ((10, 3, 0), (10, 8, 3, 2, 0)),
    11: ((11, 2, 0), (11, 8, 5, 2, 0)),
}


class UnsupportedLengthError(InvalidInstanceError):
    pass


@dataclass(frozen=True)
class FamilyConfig:
    """
    Parameters of one reference family.

    ``params`` holds the family-specific choices: ``shifts`` and
    ``polynomials`` for gold, ``roots`` for fzc and ``sigma`` for sarwate.
    Missing entries are filled by :func:`resolve` with the defaults.
    """

    family: str
    N: int
    K: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidInstanceError(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        if self.N < 2 or self.K < 1:
            raise InvalidInstanceError(f"need N >= 2 and K >= 1, got N={self.N}, K={self.K}")


def _degree(N):
    r = int(N + 1).bit_length() - 1
    if N < 7 or 2**r - 1 != N:
        raise UnsupportedLengthError(f"Gold codes need N = 2^r - 1 with r >= 3, got N={N}")
    return r


def m_sequence(poly, state=None):
    """
    Binary m-sequence of the LFSR with characteristic polynomial ``poly``.

    ``poly`` lists the exponents with nonzero coefficient, e.g. ``(5, 2, 0)``
    for x^5 + x^2 + 1, giving the recurrence a[n+5] = a[n+2] xor a[n].
    Raises if the polynomial is not primitive (period shorter than 2^r - 1).
    """
    exps = sorted(set(int(e) for e in poly), reverse=True)
    r = exps[0]
    if r < 2 or 0 not in exps:
        raise InvalidInstanceError(f"feedback polynomial {poly} needs degree >= 2 and a constant term")
    taps = [e for e in exps[1:]]
    N = 2**r - 1
    reg = list(state) if state is not None else [0] * (r - 1) + [1]
    if len(reg) != r or not any(reg):
        raise InvalidInstanceError("initial LFSR state must have r bits, not all zero")
    out = np.empty(N, dtype=np.int8)
    a = list(reg)
    for n in range(N):
        out[n] = a[n]
        a.append(np.bitwise_xor.reduce([a[n + e] for e in taps]))
    # primitive iff the state sequence has full period N
    seen_start = tuple(reg)
    for p in range(1, N):
        if tuple(a[p : p + r]) == seen_start:
            raise InvalidInstanceError(f"polynomial {poly} is not primitive (period {p} < {N})")
    return out


def to_bipolar(bits):
    """Map 0 -> +1 and 1 -> -1."""
    return 1 - 2 * np.asarray(bits, dtype=float)


def periodic_correlation(x, y):
    """``C[l] = sum_n x[n] conj(y[n + l mod N])`` for every shift l = 0..N-1."""
    x = np.asarray(x)
    y = np.asarray(y)
    return np.array([np.sum(x * np.conj(np.roll(y, -l))) for l in range(x.size)])


def gold_threshold(r):
    return 1 + 2 ** ((r + 2) // 2)


def _check_preferred(u, v, r):
    t = gold_threshold(r)
    allowed = {-1, -t, t - 2}
    vals = set(np.rint(periodic_correlation(to_bipolar(u), to_bipolar(v)).real).astype(int))
    if not vals <= allowed:
        raise InvalidInstanceError(
            f"polynomials do not form a preferred pair: crosscorrelation takes {sorted(vals)}, "
            f"a preferred pair only takes {sorted(allowed)}"
        )


def gold_family(N, polynomials=None):
    """
    All N + 2 Gold sequences (bits) of length N: ``u xor shift(v, tau)`` for
    tau = 0..N-1, followed by u and v.
    """
    r = _degree(N)
    if polynomials is None:
        if r not in PREFERRED_PAIRS:
            raise UnsupportedLengthError(f"no default preferred pair for r={r}; pass polynomials explicitly")
        polynomials = PREFERRED_PAIRS[r]
    p1, p2 = polynomials
    if max(p1) != r or max(p2) != r:
        raise InvalidInstanceError(f"both polynomials must have degree {r} for N={N}")
    u, v = m_sequence(p1), m_sequence(p2)
    _check_preferred(u, v, r)
    members = [np.bitwise_xor(u, np.roll(v, -tau)) for tau in range(N)]
    return np.array(members + [u, v])


def gold_codes(config):
    """K Gold sequences (entries +1/-1, as complex) selected by ``params['shifts']``."""
    cfg = resolve(config)
    fam = gold_family(cfg.N, cfg.params["polynomials"])
    idx = list(cfg.params["shifts"])
    if any(not 0 <= i < fam.shape[0] for i in idx):
        raise InvalidInstanceError(f"gold shifts must lie in 0..{fam.shape[0] - 1}")
    return to_bipolar(fam[idx]).astype(complex)


def fzc_sequences(config):
    """
    Frank-Zadoff-Chu chirps ``exp(j pi r n(n+1)/N)``, n = 1..N (odd N), or
    ``exp(j pi r n^2/N)`` for even N.
    """
    cfg = resolve(config)
    N = cfg.N
    n = np.arange(1, N + 1)
    phase = n * (n + 1) if N % 2 else n * n
    # reduce the integer phase mod 2N before scaling to keep the angles exact
    rows = [np.exp(1j * np.pi * ((r * phase) % (2 * N)) / N) for r in cfg.params["roots"]]
    return np.array(rows)


def sarwate_sequences(config):
    """Single carriers ``exp(2 pi j n sigma_k / N)``, n = 1..N."""
    cfg = resolve(config)
    N = cfg.N
    n = np.arange(1, N + 1)
    return np.array([np.exp(2j * np.pi * ((n * s) % N) / N) for s in cfg.params["sigma"]])


def default_params(family, N, K):
    if family == "gold":
        return {"polynomials": PREFERRED_PAIRS.get(_degree(N)), "shifts": tuple(range(K))}
    if family == "fzc":
        roots, r = [], 1
        while len(roots) < K:
            if gcd(r, N) == 1:
                roots.append(r)
            r += 1
        return {"roots": tuple(roots)}
    return {"sigma": tuple((k * N) // K for k in range(K))}


def resolve(config):
    """Fill defaults and validate; returns a new config with every parameter explicit."""
    N, K = config.N, config.K
    params = dict(default_params(config.family, N, K))
    params.update({k: v for k, v in config.params.items() if v is not None})
    if config.family == "gold":
        if params["polynomials"] is None:
            raise UnsupportedLengthError(f"no default preferred pair for N={N}; pass polynomials explicitly")
        params["polynomials"] = tuple(tuple(int(e) for e in p) for p in params["polynomials"])
        params["shifts"] = tuple(int(s) for s in params["shifts"])
        if len(set(params["shifts"])) != len(params["shifts"]):
            raise InvalidInstanceError("gold shift selections must be distinct")
        key = "shifts"
    elif config.family == "fzc":
        params["roots"] = tuple(int(r) for r in params["roots"])
        bad = [r for r in params["roots"] if gcd(r, N) != 1 or r % N == 0]
        if bad:
            raise InvalidInstanceError(f"fzc roots must be coprime to N={N}: {bad}")
        key = "roots"
    else:
        params["sigma"] = tuple(int(s) for s in params["sigma"])
        if any(not 0 <= s < N for s in params["sigma"]):
            raise InvalidInstanceError(f"sarwate sigma values must lie in 0..{N - 1}")
        if len(set(params["sigma"])) != len(params["sigma"]):
            raise InvalidInstanceError("sarwate sigma values must be pairwise distinct")
        key = "sigma"
    if len(params[key]) != K:
        raise InvalidInstanceError(f"{config.family} needs {K} {key}, got {len(params[key])}")
    return FamilyConfig(config.family, N, K, params)


def generate(config):
    """Dispatch on ``config.family``; returns ``(sequences, resolved_config)``."""
    cfg = resolve(config)
    gen = {"gold": gold_codes, "fzc": fzc_sequences, "sarwate": sarwate_sequences}[cfg.family]
    return gen(cfg), cfg
