import numpy as np
import pytest

from conftest import central_diff, random_feasible, rel_err
from seqopt.basis import unpack
from seqopt.constraints import (
    constraint_c,
    constraint_d,
    constraint_e,
    feasibility_report,
    grad_d,
    grad_e,
    jacobian_c,
)
from seqopt.errors import ShapeError
from seqopt.objective import cos_weights, per_user_costs, uniform_weights


@pytest.mark.parametrize("N", [4, 8])
@pytest.mark.parametrize("K", [1, 2, 4])
def test_c_and_d_derivatives_fd(N, K, rng):
    for slack in (False, True):
        Z = uniform_weights(K, 1, 2) if slack else None
        x = random_feasible(N, K, rng, Z) + 0.1 * rng.standard_normal(4 * N * K + slack)
        for k in range(1, K + 1):
            J = jacobian_c(k, x, K)
            assert rel_err(J, central_diff(lambda v: constraint_c(k, v, K), x)) <= 1e-6
            assert rel_err(grad_d(k, x, K), central_diff(lambda v: constraint_d(k, v, K), x)) <= 1e-6


@pytest.mark.parametrize("N", [4, 8])
@pytest.mark.parametrize("K", [1, 2, 4])
def test_e_gradient_fd(N, K, rng):
    Z = rng.uniform(0.2, 3.0, (K, K))
    for _ in range(3):
        x = random_feasible(N, K, rng, Z)
        x[1:] *= rng.uniform(0.8, 1.2)
        for i in range(1, K + 1):
            fd = central_diff(lambda v: constraint_e(i, v, Z), x)
            assert rel_err(grad_e(i, x, Z), fd) <= 1e-6


def delta_factor_form(i, x, Z):
    """alpha part of the e-gradient written with a (1 + delta_ip) factor."""
    K = Z.shape[0]
    N = (x.size - 1) // (4 * K)
    _, a, b = unpack(x, N, K, True)
    c, d = cos_weights(N)
    A = np.sum(a**2, axis=1) * c
    B = np.sum(b**2, axis=1) * d
    out_a = np.zeros_like(a)
    out_b = np.zeros_like(b)
    for p in range(K):
        f = (1 + (p == i - 1)) * Z[i - 1, p]
        out_a[p] = 2 * a[p] * f * A[i - 1]
        out_b[p] = 2 * b[p] * f * B[i - 1]
    return np.concatenate([out_a, out_b], axis=1).reshape(-1)


def test_delta_factor_form_exact_for_diagonal_weights(rng):
    N, K = 6, 3
    Z = np.diag([1.0, 2.0, 0.5])
    x = random_feasible(N, K, rng, Z)
    for i in range(1, K + 1):
        assert np.allclose(grad_e(i, x, Z)[1:], delta_factor_form(i, x, Z), rtol=1e-12)


def test_delta_factor_form_misses_cross_terms(rng):
    # with off-diagonal weight the own-user block also picks up sum_k Z[i,k] A^k
    N, K = 6, 3
    Z = uniform_weights(K, 1, 2)
    x = random_feasible(N, K, rng, Z)
    fd = central_diff(lambda v: constraint_e(1, v, Z), x)[1:]
    assert rel_err(grad_e(1, x, Z)[1:], fd) <= 1e-6
    assert rel_err(delta_factor_form(1, x, Z), fd) > 1e-2


def test_e_needs_slack(rng):
    Z = uniform_weights(2, 1, 1)
    x = random_feasible(4, 2, rng)
    with pytest.raises(ShapeError):
        constraint_e(1, x, Z)
    with pytest.raises(ShapeError):
        feasibility_report(x, Z, "p2")


def test_feasibility_report(rng):
    N, K = 8, 3
    Z = uniform_weights(K, 2, 1)
    x = random_feasible(N, K, rng, Z)
    rep = feasibility_report(x, Z, "p2")
    assert rep.e1 <= 1e-12 and rep.e2 <= 1e-12 and abs(rep.e3) <= 1e-12
    assert rep.is_feasible()
    assert feasibility_report(x[1:], Z).e3 is None

    y = x.copy()
    y[1:] *= 1.01
    rep = feasibility_report(y, Z, "p2")
    assert np.isclose(rep.e1, N * (1.01**2 - 1))
    assert not rep.is_feasible()

    y = x.copy()
    y[1 + 2 * N + 3] += 1e-3  # a beta entry of user 1
    rep = feasibility_report(y, Z, "p2")
    assert np.isclose(rep.e2, 1e-3) and np.isclose(np.max(np.abs(constraint_c(1, y, K))), 1e-3)

    y = x.copy()
    y[0] -= 0.5
    assert np.isclose(feasibility_report(y, Z, "p2").e3, -0.5)
    assert np.isclose(max(constraint_e(i, y, Z) for i in range(1, K + 1)), 0.5)


def test_constraint_values_at_feasible_point(rng):
    N, K = 5, 2
    Z = uniform_weights(K, 1, 1)
    x = random_feasible(N, K, rng, Z)
    costs = per_user_costs(x, Z)
    for k in range(1, K + 1):
        assert np.max(np.abs(constraint_c(k, x, K))) <= 1e-12
        assert abs(constraint_d(k, x, K)) <= 1e-12
        assert np.isclose(constraint_e(k, x, Z), costs[k - 1] - x[0])
    with pytest.raises(IndexError):
        constraint_d(3, x, K)
