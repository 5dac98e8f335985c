import pytest

from gazesnn.config import load_config
from gazesnn.connectome import assemble_controller

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def cfg():
    return load_config(environ={})


@pytest.fixture(scope="session")
def assembly(cfg):
    return assemble_controller(cfg)


@pytest.fixture
def fresh_assembly(cfg):
    return assemble_controller(cfg)
