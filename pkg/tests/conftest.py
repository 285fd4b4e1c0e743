import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_criteria = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _criteria.append((marker.args[0], marker.args[1], rep.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    summary = {}
    for number, title, outcome in _criteria:
        ok = summary.get(number, (title, True))[1]
        summary[number] = (title, ok and outcome == "passed")
    for number, (title, ok) in sorted(summary.items()):
        terminalreporter.write_line(f"AC{number:<2} {'PASS' if ok else 'FAIL'}  {title}")
