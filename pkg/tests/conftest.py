import numpy as np
import pytest

from capfield.suites import cached_nets


@pytest.fixture(scope="session")
def nets1():
    """Nested circle nets R_1..R_14, seed 0."""
    return cached_nets(1, 14, 0)


@pytest.fixture(scope="session")
def nets2():
    return cached_nets(2, 6, 0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def emit(number: int, title: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number} ({title}): {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
