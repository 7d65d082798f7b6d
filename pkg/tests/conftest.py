from __future__ import annotations

import pytest

# filled by the acceptance tests, printed once at the end of the session
ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def report_criterion():
    def record(name: str, passed: bool, detail: str) -> None:
        line = f"{name} {'PASS' if passed else 'FAIL'}: {detail}"
        ACCEPTANCE[name] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda n: int(n.split("-")[1])):
        terminalreporter.write_line(ACCEPTANCE[name])
