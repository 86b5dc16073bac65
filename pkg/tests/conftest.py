import pytest
from hypothesis import HealthCheck, settings

from stochengine import table1_overdamped, table1_underdamped

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def od():
    return table1_overdamped()


@pytest.fixture
def ud():
    return table1_underdamped(m=1.0)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        checks = results[number]
        failed = [name for name, ok, _ in checks if not ok]
        detail = "; ".join(f"{name}: {info}" for name, _, info in checks)
        verdict = "PASS" if not failed else "FAIL"
        terminalreporter.write_line(f"{verdict} criterion {number:2d}  {detail}")
