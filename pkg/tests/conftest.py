import numpy as np
import pytest
from hypothesis import settings

from persdel.poly import PiecewisePoly

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tri():
    return PiecewisePoly([0.0, 0.5, 1.0], [[0.0, 4.0], [2.0, -4.0]])


ACCEPTANCE: dict[int, str] = {}


def record(k: int, ok: bool, runtime: float, detail: str) -> None:
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} ({runtime:.2f}s) {detail}"
    ACCEPTANCE[k] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
