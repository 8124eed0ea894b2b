import pytest

from boltzlim.grid import build_velocity_grid

ACCEPTANCE_LINES: list = []


@pytest.fixture(scope="session")
def grid16():
    return build_velocity_grid(6.0, 16)


@pytest.fixture(scope="session")
def grid12():
    return build_velocity_grid(6.0, 12)


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion and echo it."""

    def record(label: str, ok: bool, detail: str = ""):
        line = f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
