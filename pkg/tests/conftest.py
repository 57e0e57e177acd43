import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from partialid.bart import BartConfig

settings.register_profile('default', deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile('default')


@pytest.fixture
def small_bart():
    return BartConfig(L=20, n_burn=50, n_keep=40, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record and print one PASS/FAIL line for an acceptance criterion, then assert."""
    def check(number, ok, detail):
        line = f'criterion {number:>2}: {"PASS" if ok else "FAIL"}  {detail}'
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line
    return check


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section('acceptance criteria')
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
