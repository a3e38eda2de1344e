import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_feasible, random_sequences
from seqopt.basis import SpectralCoefficients, decompose, lift_to_real, lower_to_complex
from seqopt.errors import FeasibilityError
from seqopt.metrics import (
    correlation_metrics,
    objective_bound_p2,
    objective_bounds_p1,
    pairwise_moments,
    weight_extremes,
)
from seqopt.objective import cos_weights, objective_p1, per_user_costs, uniform_weights
from seqopt.refseq import FamilyConfig, generate


def metrics_oracle(alpha, beta):
    K, N = alpha.shape
    r_ac = np.array([(np.sum(np.abs(alpha[i]) ** 4) + np.sum(np.abs(beta[i]) ** 4)) / (2 * N) - 1 for i in range(K)])
    r_cc = np.zeros(K)
    for i in range(K):
        vals = []
        for k in range(K):
            if k != i:
                s = 0.0
                for m in range(N):
                    s += abs(alpha[i, m]) ** 2 * abs(alpha[k, m]) ** 2 + abs(beta[i, m]) ** 2 * abs(beta[k, m]) ** 2
                vals.append(s / (2 * N))
        r_cc[i] = np.mean(vals) if vals else 0.0
    return r_ac, r_cc


def test_matches_direct_sums(rng):
    c = decompose(random_sequences(7, 4, rng))
    m = correlation_metrics(c)
    r_ac, r_cc = metrics_oracle(c.alpha, c.beta)
    assert np.allclose(m.r_ac_per_user, r_ac) and np.allclose(m.r_cc_per_user, r_cc)
    assert np.isclose(m.r_ac, r_ac.mean()) and np.isclose(m.r_cc_max, r_cc.max())
    assert m.r_ac <= m.r_ac_max and m.r_cc <= m.r_cc_max


def test_flat_spectrum_has_zero_autocorrelation():
    N = 8
    c = decompose(np.r_[np.sqrt(N), np.zeros(N - 1)])
    m = correlation_metrics(c)
    assert abs(m.r_ac) <= 1e-12 and m.r_cc == 0.0


def test_single_spike_spectrum():
    N = 8
    n = np.arange(N)
    c = decompose(np.exp(2j * np.pi * n * 2 / N))
    m = correlation_metrics(c)
    direct = (np.sum(np.abs(c.alpha) ** 4) + np.sum(np.abs(c.beta) ** 4)) / (2 * N) - 1
    assert np.isclose(m.r_ac, direct)
    # the alpha half alone contributes N^2 / (2N)
    assert np.isclose(np.sum(np.abs(c.alpha) ** 4) / (2 * N), N / 2)


def test_sarwate_pair_alpha_part_vanishes():
    seqs, _ = generate(FamilyConfig("sarwate", 31, 2))
    c = decompose(seqs)
    pa = np.abs(c.alpha) ** 2
    assert np.max(pa[0] * pa[1]) <= 1e-20
    pb = np.abs(c.beta) ** 2
    m = correlation_metrics(c)
    assert np.isclose(m.r_cc_per_user[0], np.sum(pb[0] * pb[1]) / 62)


def test_norm_violation_raises(rng):
    c = decompose(2 * random_sequences(5, 2, rng))
    with pytest.raises(FeasibilityError):
        correlation_metrics(c)


def test_permuting_users(rng):
    c = decompose(random_sequences(6, 4, rng))
    perm = [2, 0, 3, 1]
    m1 = correlation_metrics(c)
    m2 = correlation_metrics(SpectralCoefficients(c.alpha[perm], c.beta[perm]))
    assert np.allclose(m2.r_ac_per_user, m1.r_ac_per_user[perm])
    assert np.allclose(m2.r_cc_per_user, m1.r_cc_per_user[perm])
    assert np.isclose(m1.r_ac, m2.r_ac) and np.isclose(m1.r_cc_max, m2.r_cc_max)


def test_weight_extremes():
    Z = np.array([[1.0, 4.0], [0.5, 2.0]])
    assert weight_extremes(Z) == (1.0, 2.0, 0.5, 4.0)
    assert weight_extremes(np.array([[3.0]])) == (3.0, 3.0, 0.0, 0.0)


def test_k1_flat_bounds():
    N = 8
    x = lift_to_real(decompose(np.r_[np.sqrt(N), np.zeros(N - 1)]))
    Z = np.array([[2.0]])
    m = correlation_metrics(lower_to_complex(x, N, 1)[0])
    lo, hi = objective_bounds_p1(m, Z, N, 1)
    assert np.isclose(lo, N * 2.0) and np.isclose(objective_p1(x, Z), 2 * N * 2.0) and np.isclose(hi, 3 * N * 2.0)


def test_uniform_weights_bounds_differ_by_three(rng):
    N, K = 6, 3
    x = random_feasible(N, K, rng)
    m = correlation_metrics(lower_to_complex(x, N, K)[0])
    lo, hi = objective_bounds_p1(m, uniform_weights(K, 1.5, 1.5), N, K)
    assert np.isclose(hi, 3 * lo)


def test_pointwise_weight_identity(rng):
    N, K = 9, 3
    c = decompose(random_sequences(N, K, rng))
    cc, dd = cos_weights(N)
    pa, pb = np.abs(c.alpha) ** 2, np.abs(c.beta) ** 2
    S = (pa * cc) @ pa.T + (pb * dd) @ pb.T
    P = pairwise_moments(c)
    assert np.all(S >= 0.5 * P - 1e-12) and np.all(S <= 1.5 * P + 1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 16), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_bounds_hold(N, K, seed):
    r = np.random.default_rng(seed)
    Z = r.uniform(0.0, 3.0, (K, K))
    x = random_feasible(N, K, r)
    m = correlation_metrics(lower_to_complex(x, N, K)[0])
    f = objective_p1(x, Z)
    lo, hi = objective_bounds_p1(m, Z, N, K)
    tol = 1e-10 * max(1.0, f)
    assert lo - tol <= f <= hi + tol
    assert np.max(per_user_costs(x, Z)) <= objective_bound_p2(m, Z, N, K) + tol
    assert np.all(m.r_ac_per_user >= -1e-12) and np.all(m.r_cc_per_user >= 0)
