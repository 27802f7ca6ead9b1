"""Shared fixtures and the acceptance summary printed at the end of a run."""

import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(tag: str, passed: bool, detail: str) -> None:
    line = f"{tag}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s[2:s.index(":")].rstrip("abc"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def random_stochastic(rng, n, floor=0.05):
    P = rng.random((n, n)) + floor
    return P / P.sum(axis=1, keepdims=True)
