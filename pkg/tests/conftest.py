"""Collects the acceptance verdicts and prints them after the run."""

import pytest

ACCEPTANCE: list[tuple[str, bool, str]] = []


class AcceptanceLog:
    def record(self, name: str, passed: bool, detail: str) -> bool:
        passed = bool(passed)
        ACCEPTANCE.append((name, passed, detail))
        print(f"ACCEPTANCE {name}: {'PASS' if passed else 'FAIL'} | {detail}")
        return passed


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
