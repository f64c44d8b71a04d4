import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_LINES = []


def record_acceptance(number, title, passed, detail=""):
    line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}"
    if detail:
        line += f": {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def kinked_curve():
    """Noisy piecewise-linear curve with its kink between indices 30 and 31."""
    from indentcp import ForceCurve

    r = np.random.default_rng(7)
    n, k = 80, 30
    x = np.linspace(0.0, 1.0, n)
    xg = 0.5 * (x[k - 1] + x[k])
    y = np.where(np.arange(n) < k, 0.1 + 0.2 * x, 0.1 + 0.2 * xg + 5.0 * (x - xg))
    return ForceCurve(x, y + r.normal(0, 0.01, n))
