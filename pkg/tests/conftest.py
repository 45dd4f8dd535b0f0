import pytest

from toppmpc import NOMINAL_STATE, ModelParams, MpcConfig, run_receding_horizon

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def nominal_run():
    """The default closed loop over one year (about 20 s), shared by all tests."""
    return run_receding_horizon(NOMINAL_STATE, MpcConfig(), ModelParams())


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
