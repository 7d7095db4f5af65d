import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> (title, verdict, detail); filled by test_acceptance
ACCEPTANCE = {}


def record(num, title, ok, detail=""):
    ACCEPTANCE[num] = (title, "PASS" if ok else "FAIL", detail)
    line = f"ACCEPTANCE {num:>2} {'PASS' if ok else 'FAIL'}  {title}  {detail}"
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, verdict, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"{num:>2} {verdict}  {title}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
