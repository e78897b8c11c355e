import numpy as np
import pytest
from hypothesis import settings

from brwlab.groups import GroupSpec, StepDistribution
from brwlab.offspring import OffspringDistribution

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def f2():
    return GroupSpec.free_group(2)


@pytest.fixture
def f2_lazy(f2):
    return StepDistribution.lazy_uniform(f2, 0.2)


@pytest.fixture
def weak_mu():
    """m = 1.05: weakly surviving on F_2 with laziness 0.2."""
    return OffspringDistribution((0.2, 0.55, 0.25))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")
    config._criteria = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    n, title = mark.args
    ok = call.excinfo is None
    prev = item.config._criteria.get(n, (title, True))
    item.config._criteria[n] = (title, prev[1] and ok)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    crit = getattr(config, "_criteria", {})
    if not crit:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(crit):
        title, ok = crit[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}")
