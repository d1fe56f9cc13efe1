import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from levyquant import amplitude as A
from levyquant.noise_models import GaussianLK, PoissonParams, StableParams, Sum

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

SEED = 20240601


@pytest.fixture
def gen():
    return np.random.Generator(np.random.Philox(SEED))


@pytest.fixture
def cauchy():
    return StableParams(1.0, 0.0, 1.0, 0.0)


@pytest.fixture
def gaussian():
    return GaussianLK(1.0)


@pytest.fixture
def poisson_uniform():
    return PoissonParams(1.0, A.uniform(0.0, 1.0))


@pytest.fixture
def sum_model(cauchy, poisson_uniform):
    return Sum(cauchy, poisson_uniform)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one named pass/fail verdict; a test that errors first is recorded as a failure."""
    results = request.config.stash.setdefault(_ACCEPTANCE, [])
    seen = []

    def record(label: str, passed: bool, detail: str) -> bool:
        seen.append(label)
        results.append((label, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'} {label}: {detail}")
        return bool(passed)

    yield record
    if not seen:
        results.append((request.node.name, False, "raised before reaching its verdict"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_ACCEPTANCE, [])
    if not results:
        return
    terminalreporter.section("acceptance")
    for label, passed, detail in sorted(results, key=lambda r: int(r[0].split()[0])
                                        if r[0].split()[0].isdigit() else 99):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {label}: {detail}")
