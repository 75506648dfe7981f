import time

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_criteria: list[tuple[str, str, float]] = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        _criteria.append((props["criterion"], report.outcome.upper(), props.get("runtime", report.duration)))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, runtime in sorted(_criteria):
        terminalreporter.write_line(f"{name}: {'PASS' if outcome == 'PASSED' else 'FAIL'} ({runtime:.2f} s)")


class _Criterion:
    def __init__(self, record_property):
        self._record = record_property
        self.name = None
        self.limit = None
        self.started = None

    def __call__(self, name: str, limit: float):
        self.name, self.limit = name, limit
        self.started = time.perf_counter()
        self._record("criterion", name)

    def finish(self):
        elapsed = time.perf_counter() - self.started
        self._record("runtime", elapsed)
        assert elapsed < self.limit, f"{self.name} took {elapsed:.2f} s (limit {self.limit} s)"


@pytest.fixture
def criterion(record_property):
    """Tag a test as an acceptance criterion; the summary prints one line per tag."""
    return _Criterion(record_property)
