import sys

import numpy as np
import pytest

from modscat.grid import GridSpec, reference_profile, sample_profile


@pytest.fixture(scope="session")
def ref_grid():
    return GridSpec(2048, 60.0)


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(512, 30.0)


@pytest.fixture(scope="session")
def v_ref(ref_grid):
    return sample_profile(reference_profile(), ref_grid)


@pytest.fixture(scope="session")
def v_small(small_grid):
    return sample_profile(reference_profile(), small_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split()[0])):
            terminalreporter.write_line(line)
