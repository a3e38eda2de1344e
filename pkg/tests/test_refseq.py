import numpy as np
import pytest

from seqopt.errors import InvalidInstanceError
from seqopt.refseq import (
    PREFERRED_PAIRS,
    FamilyConfig,
    UnsupportedLengthError,
    default_params,
    fzc_sequences,
    generate,
    gold_family,
    gold_threshold,
    m_sequence,
    periodic_correlation,
    resolve,
    to_bipolar,
)


def corr_oracle(x, y):
    N = len(x)
    return np.array([sum(x[n] * np.conj(y[(n + l) % N]) for n in range(N)) for l in range(N)])


def test_periodic_correlation_matches_loops(rng):
    x = rng.standard_normal(9) + 1j * rng.standard_normal(9)
    y = rng.standard_normal(9) + 1j * rng.standard_normal(9)
    assert np.allclose(periodic_correlation(x, y), corr_oracle(x, y))


@pytest.mark.parametrize("r", sorted(PREFERRED_PAIRS))
def test_m_sequences_are_balanced_with_two_level_autocorrelation(r):
    for poly in PREFERRED_PAIRS[r]:
        u = m_sequence(poly)
        N = 2**r - 1
        assert u.size == N and u.sum() == 2 ** (r - 1)
        ac = np.rint(periodic_correlation(to_bipolar(u), to_bipolar(u)).real)
        assert ac[0] == N and np.all(ac[1:] == -1)


def test_m_sequence_recurrence():
    u = m_sequence((5, 2, 0))
    for n in range(31 - 5):
        assert u[n + 5] == u[n + 2] ^ u[n]


def test_non_primitive_polynomial_rejected():
    # x^4 + x^2 + 1 = (x^2 + x + 1)^2 has period 6
    with pytest.raises(InvalidInstanceError, match="not primitive"):
        m_sequence((4, 2, 0))
    with pytest.raises(InvalidInstanceError):
        m_sequence((5, 2))


def test_gold_n31_correlation_values_exhaustive():
    fam = to_bipolar(gold_family(31))
    assert fam.shape == (33, 31)
    t = gold_threshold(5)
    allowed = {-1, -t, t - 2}
    assert allowed == {-1, -9, 7}
    seen = set()
    for i in range(33):
        for k in range(i, 33):
            c = np.rint(corr_oracle(fam[i], fam[k]).real).astype(int)
            vals = c[1:] if i == k else c
            seen |= set(vals.tolist())
    assert seen <= allowed


@pytest.mark.parametrize("r", [3, 6, 7])
def test_gold_other_lengths(r):
    N = 2**r - 1
    fam = to_bipolar(gold_family(N))
    t = gold_threshold(r)
    c = np.rint(periodic_correlation(fam[0], fam[1]).real).astype(int)
    assert set(c.tolist()) <= {-1, -t, t - 2}


def test_gold_rejects_bad_lengths():
    for N in (30, 3, 32):
        with pytest.raises(UnsupportedLengthError):
            generate(FamilyConfig("gold", N, 2))


def test_gold_rejects_non_preferred_pair():
    with pytest.raises(InvalidInstanceError, match="preferred pair"):
        gold_family(31, ((5, 2, 0), (5, 3, 0)))


@pytest.mark.parametrize("N", [31, 16, 13])
def test_fzc_ideal_autocorrelation(N):
    seqs, cfg = generate(FamilyConfig("fzc", N, 3))
    assert np.allclose(np.abs(seqs), 1.0)
    for s in seqs:
        ac = np.abs(corr_oracle(s, s))
        assert np.isclose(ac[0], N) and np.max(ac[1:]) <= 1e-10


def test_fzc_cross_correlation_magnitude_prime_length():
    seqs, cfg = generate(FamilyConfig("fzc", 31, 2))
    assert cfg.params["roots"] == (1, 2)
    cc = np.abs(periodic_correlation(seqs[0], seqs[1]))
    assert np.allclose(cc, np.sqrt(31))


def test_sarwate_zero_cross_correlation():
    seqs, cfg = generate(FamilyConfig("sarwate", 31, 4))
    assert cfg.params["sigma"] == (0, 7, 15, 23)
    assert np.allclose(np.abs(seqs), 1.0)
    for i in range(4):
        for k in range(i + 1, 4):
            assert np.max(np.abs(corr_oracle(seqs[i], seqs[k]))) <= 1e-10


def test_default_parameters():
    assert default_params("fzc", 12, 3) == {"roots": (1, 5, 7)}
    assert default_params("gold", 31, 2)["shifts"] == (0, 1)
    assert default_params("sarwate", 8, 4) == {"sigma": (0, 2, 4, 6)}


def test_explicit_parameters_and_validation():
    seqs, cfg = generate(FamilyConfig("gold", 31, 2, {"shifts": (31, 32)}))
    assert np.array_equal(seqs.real, to_bipolar(gold_family(31)[31:]))
    with pytest.raises(InvalidInstanceError):
        resolve(FamilyConfig("gold", 31, 2, {"shifts": (1, 1)}))
    with pytest.raises(InvalidInstanceError):
        generate(FamilyConfig("gold", 31, 2, {"shifts": (0, 40)}))
    with pytest.raises(InvalidInstanceError):
        resolve(FamilyConfig("fzc", 12, 1, {"roots": (4,)}))
    with pytest.raises(InvalidInstanceError):
        resolve(FamilyConfig("sarwate", 8, 2, {"sigma": (1, 1)}))
    with pytest.raises(InvalidInstanceError):
        resolve(FamilyConfig("sarwate", 8, 2, {"sigma": (1, 8)}))
    with pytest.raises(InvalidInstanceError):
        resolve(FamilyConfig("sarwate", 8, 2, {"sigma": (1,)}))
    with pytest.raises(InvalidInstanceError):
        FamilyConfig("walsh", 8, 2)


def test_fzc_phase_formula():
    seqs = fzc_sequences(FamilyConfig("fzc", 7, 1, {"roots": (3,)}))
    n = np.arange(1, 8)
    assert np.allclose(seqs[0], np.exp(1j * np.pi * 3 * n * (n + 1) / 7))


def test_families_have_power_n():
    for fam in ("gold", "fzc", "sarwate"):
        seqs, _ = generate(FamilyConfig(fam, 31, 4))
        assert seqs.shape == (4, 31)
        assert np.allclose(np.sum(np.abs(seqs) ** 2, axis=1), 31)
