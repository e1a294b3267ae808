import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from oblique.cache import set_cache
from oblique.geometry import build_broken_line, build_circle, build_corner_loop

settings.register_profile(
    "numerics",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
    derandomize=True,
)
settings.load_profile("numerics")


@pytest.fixture(autouse=True)
def _no_global_cache():
    set_cache(None)
    yield
    set_cache(None)


@pytest.fixture(scope="session")
def circle256():
    return build_circle(1.0, 256)


@pytest.fixture(scope="session")
def circle1024():
    return build_circle(1.0, 1024)


@pytest.fixture(scope="session")
def gauss_circle():
    return build_circle(1.0, 256, quadrature="gauss")


@pytest.fixture(scope="session")
def broken_line():
    return build_broken_line(np.pi / 4, 10.0, 320)


@pytest.fixture(scope="session")
def teardrop():
    return build_corner_loop(np.pi / 4, 1.0, 512)


_ACCEPTANCE_LINES = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
