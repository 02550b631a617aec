import numpy as np
import pytest
from scipy.stats import ortho_group

from admmlocus.problem import PiecewiseLinear1DArray, Quadratic, SplitProblem, WeightedL1

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


def spd(rng, n, floor=0.1):
    X = rng.standard_normal((n, n))
    return X @ X.T / n + floor * np.eye(n)


def psd(rng, n, rank=None):
    rank = n if rank is None else rank
    X = rng.standard_normal((n, rank))
    return X @ X.T / max(rank, 1)


def orthogonal(rng, m):
    if m == 1:
        return np.array([[rng.choice([-1.0, 1.0])]])
    return ortho_group.rvs(m, random_state=rng)


def random_piecewise(rng, n, kmax=3):
    bps, sls = [], []
    for _ in range(n):
        k = int(rng.integers(0, kmax + 1))
        bps.append(np.sort(rng.uniform(-2, 2, k)) + np.arange(k) * 1e-3)
        sls.append(np.sort(rng.uniform(-2, 2, k + 1)))
    return PiecewiseLinear1DArray(bps, sls)


def random_quadratic_problem(rng, m=None, n1=None, n2=None):
    """Both directions quadratic, general A_i and E."""
    m = int(rng.integers(2, 7)) if m is None else m
    n1 = int(rng.integers(1, m + 1)) if n1 is None else n1
    # n1 + n2 >= m keeps A1 x1 = A2 x2 + b feasible
    n2 = int(rng.integers(max(1, m - n1), m + 1)) if n2 is None else n2
    return SplitProblem(
        f1=Quadratic(psd(rng, n1), rng.standard_normal(n1)),
        f2=Quadratic(psd(rng, n2), rng.standard_normal(n2)),
        A1=rng.standard_normal((m, n1)),
        A2=rng.standard_normal((m, n2)),
        b=rng.standard_normal(m),
        E=spd(rng, m),
    )


def random_mixed_problem(rng, m=None, kind="l1", swap=False):
    """A quadratic with a separable non-smooth term; A = I, diagonal E."""
    m = int(rng.integers(2, 7)) if m is None else m
    quad = Quadratic(spd(rng, m, floor=0.05), rng.standard_normal(m))
    if kind == "l1":
        ns = WeightedL1(rng.uniform(0, 1, m))
    else:
        ns = random_piecewise(rng, m)
    f1, f2 = (ns, quad) if swap else (quad, ns)
    eye = np.eye(m)
    return SplitProblem(f1=f1, f2=f2, A1=eye, A2=eye, b=rng.standard_normal(m),
                        E=np.diag(rng.uniform(0.3, 3.0, m)))


def random_convex_problem(rng, m=None):
    r = rng.random()
    if r < 0.4:
        return random_quadratic_problem(rng, m=m)
    if r < 0.7:
        return random_mixed_problem(rng, m=m, kind="l1", swap=rng.random() < 0.5)
    return random_mixed_problem(rng, m=m, kind="pw", swap=rng.random() < 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
