import hypothesis
import numpy as np
import pytest

from randentire.series import CoefficientSequence

hypothesis.settings.register_profile("default", deadline=None, max_examples=40)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=8)
hypothesis.settings.load_profile("default")

_acceptance = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "acceptance", None)
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        # a parametrized criterion passes only if every case does
        verdict = "PASS" if report.outcome == "passed" else "FAIL"
        if _acceptance.get(marker) != "FAIL":
            _acceptance[marker] = verdict


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("acceptance")
    if mark is not None:
        outcome.get_result().acceptance = mark.args


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), verdict in sorted(_acceptance.items()):
        terminalreporter.write_line(f"{verdict}  [{number:>2}] {title}")


@pytest.fixture
def exp_base():
    return CoefficientSequence.exponential()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
