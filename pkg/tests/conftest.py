import pytest

from pcell.padic import PAdic


def px(p, value, exponent=0):
    return PAdic(p, value, exponent)


@pytest.fixture
def P():
    return px


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
