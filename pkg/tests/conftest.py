from __future__ import annotations

import pytest

from timebound.lehmann_rabin import lr_model
from timebound.pta import reachable_states


@pytest.fixture(scope="session")
def lr3():
    return lr_model(3)


@pytest.fixture(scope="session")
def reach3(lr3):
    return reachable_states(lr3)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict(request):
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}"
        if detail:
            line += f" ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
