import pytest

from pibt import _backend

ACCEPTANCE_LINES: list[str] = []


def pytest_report_header(config):
    return f"pibt kernels: {_backend.name()}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def record():
    def _record(line: str) -> None:
        ACCEPTANCE_LINES.append(line)
        print(line)

    return _record

