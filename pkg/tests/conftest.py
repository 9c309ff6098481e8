import pytest

from unbalanced_sbm.model import derive_params, params_from_abc

# filled by tests/test_acceptance.py, one line per acceptance criterion
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def p25():
    """p=0.25, d=100, lambda=1: a=1.3, b=0.9, c=31/30."""
    return params_from_abc(0.25, 100, 1.3, 0.9, 31 / 30)


@pytest.fixture
def no_signal():
    return derive_params(0.3, 4, 0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
