import numpy as np
import pytest

from datransfer.validation import random_state  # noqa: F401  (re-exported for tests)

ACCEPTANCE = {}


def record(criterion: int, ok: bool, detail: str = ""):
    prev = ACCEPTANCE.get(criterion)
    ACCEPTANCE[criterion] = (ok and (prev is None or prev[0]), detail if not ok or prev is None else prev[1])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
