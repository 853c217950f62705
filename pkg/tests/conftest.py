from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from slowbond.weights import ExplicitWeights

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# acceptance lines collected during the run, echoed in the terminal summary
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def configs_dir() -> Path:
    return CONFIGS


def random_explicit(seed: int, nx: int, ny: int, integer: bool = False) -> ExplicitWeights:
    rng = np.random.default_rng(seed)
    if integer:
        vals = rng.integers(1, 4, size=(nx, ny)).astype(np.float64)
    else:
        vals = rng.exponential(size=(nx, ny))
    return ExplicitWeights(vals)
