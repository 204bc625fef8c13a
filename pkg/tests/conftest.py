import pytest

# One summary line per acceptance criterion, printed after the run.
_acceptance_lines = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is not None and report.when == "call":
        num, name = marker.args
        verdict = "PASS" if report.passed else "FAIL"
        _acceptance_lines[num] = f"ACCEPTANCE {num:02d} {name}: {verdict}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for num in sorted(_acceptance_lines):
            terminalreporter.line(_acceptance_lines[num])
