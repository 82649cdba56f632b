import pytest

from streamlab import AnalysisConfig, analyze, logistic, sin_pi_flow

# Oracle values frozen before the build: period-2 orbit of the logistic map at
# mu=3.2 from brentq on l(l(x)) - x, the crisis parameter of the period-3 window
# from brentq on c5(mu) - q1(mu) (see tests/oracles.py).
PERIOD2_32 = (0.5130445095326298, 0.7994554904673701)
MU_CRISIS = 3.856800652477764


@pytest.fixture(scope="session")
def report_25():
    return analyze(AnalysisConfig(logistic(2.5), 6, 12))


@pytest.fixture(scope="session")
def report_32():
    return analyze(AnalysisConfig(logistic(3.2), 8, 14))


@pytest.fixture(scope="session")
def report_sinpi():
    return analyze(AnalysisConfig(sin_pi_flow(), 5, 10))


# one summary line per acceptance criterion -------------------------------------

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    key, label = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _CRITERIA[key] = ("PASS" if rep.passed else "FAIL", label)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: (int(k.rstrip("abc")), k)):
        state, label = _CRITERIA[key]
        terminalreporter.write_line(f"criterion {key:>3}: {state}  {label}")
