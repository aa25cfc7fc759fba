import pytest

from windowlaw.svf import ExpLogBeta, ExpSqrtLog, IterLog, LogLogPow, LogPow, LogPowOverLogLogPow

# one representative per family plus the parameter variants the checks use
FAMILIES = [
    LogPow(0.5),
    LogPow(1.0),
    LogPow(2.0),
    IterLog(2),
    IterLog(3),
    LogPowOverLogLogPow(1.0, 1.0),
    LogLogPow(2.0),
    ExpSqrtLog(),
    ExpLogBeta(0.4, 1.0),
]


@pytest.fixture(params=FAMILIES, ids=str)
def family(request):
    return request.param


# one "PASS/FAIL criterion N: ..." line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
