import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from catekit.data import TrialDataset

settings.register_profile("catekit", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("catekit")


def make_trial(n, p=3, seed=0, tau=None, prog=None, noise=0.0, balanced=False):
    """Randomised trial with optional effect/prognostic functions of X."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    if balanced:
        A = np.zeros(n)
        A[rng.permutation(n)[: n // 2]] = 1.0
    else:
        A = rng.binomial(1, 0.5, n).astype(float)
    base = np.zeros(n) if prog is None else prog(X)
    eff = np.zeros(n) if tau is None else tau(X)
    Y = base + A * eff + noise * rng.standard_normal(n)
    return TrialDataset(X, A, Y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import VERDICTS

    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[number])
