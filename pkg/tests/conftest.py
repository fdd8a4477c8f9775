
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kmslab.background import load_preset

settings.register_profile(
    "kmslab",
    derandomize=True,
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("kmslab")

SEED = 20240611
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def flat16():
    lat, bg, _ = load_preset("FLAT16")
    return lat, bg


@pytest.fixture(scope="session")
def lapse16():
    lat, bg, _ = load_preset("LAPSE16")
    return lat, bg


@pytest.fixture(scope="session")
def shift16():
    lat, bg, _ = load_preset("SHIFT16")
    return lat, bg


@pytest.fixture(scope="session", params=["FLAT16", "LAPSE16", "SHIFT16"])
def preset(request):
    lat, bg, run = load_preset(request.param)
    return request.param, lat, bg


@pytest.fixture(scope="session", params=["FLAT16", "LAPSE16"])
def static_preset(request):
    lat, bg, run = load_preset(request.param)
    return request.param, lat, bg


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
