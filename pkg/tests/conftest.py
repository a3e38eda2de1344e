import numpy as np
import pytest

from seqopt.basis import decompose, lift_to_real
from seqopt.objective import per_user_costs


def random_sequences(N, K, rng):
    """K complex sequences with power N."""
    s = rng.standard_normal((K, N)) + 1j * rng.standard_normal((K, N))
    return s * (np.sqrt(N) / np.linalg.norm(s, axis=1))[:, None]


def random_feasible(N, K, rng, Z=None):
    """Feasible vector; with ``Z`` the slack is prepended at the largest user cost."""
    x = lift_to_real(decompose(random_sequences(N, K, rng)))
    if Z is not None:
        x = np.concatenate([[np.max(per_user_costs(x, Z))], x])
    return x


def central_diff(fun, x, h=1e-5):
    """Central finite-difference gradient (or Jacobian for vector-valued fun)."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h * max(1.0, abs(x[j]))
        cols.append((np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * e[j]))
    return np.array(cols).T


def rel_err(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, echoed at the end of the session
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
