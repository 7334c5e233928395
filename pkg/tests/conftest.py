import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from thinfilm.core import Grid, PhysicalParams, State
from thinfilm.surfactant import SurfactantModel

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def cosine_state(grid, a_h=0.05, a_g=0.05, k=1):
    c = np.cos(k * np.pi * grid.x / grid.L)
    return State(1.0 + a_h * c, 1.0 + a_g * c)


def random_state(rng, n, lo=0.5, hi=1.5):
    return State(rng.uniform(lo, hi, n), rng.uniform(lo, hi, n))


@pytest.fixture
def params16():
    return PhysicalParams(1.0, SurfactantModel.linear(), Grid(1.0, 16))


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion; printed in the terminal summary."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def record(k, ok, detail):
        line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.__dict__.get("_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
