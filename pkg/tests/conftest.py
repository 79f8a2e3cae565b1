import math

import pytest
from hypothesis import settings

from ifd import aero, tether

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")


@pytest.fixture(scope="session")
def p5air():
    params, polar, _ = aero.preset("Paper5")
    return params, polar


@pytest.fixture(scope="session")
def scenario():
    return tether.reference_scenario(16.0)


@pytest.fixture(scope="session")
def kappa60():
    return 11.7**2 / (9.81 * 20.0), math.radians(60.0)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
