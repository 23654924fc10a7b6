import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from plaptree import build_tree  # noqa: E402

ACCEPTANCE: dict = {}


@pytest.fixture
def record():
    def _record(number, title, passed, detail=""):
        ACCEPTANCE[number] = (title, passed, detail)
        print(f"AC{number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}")
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"AC{number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}")


@pytest.fixture
def edge():
    return build_tree([("o", None, 1.0, None), ("a", "o", 3.0, 2.0)])


@pytest.fixture
def path2():
    return build_tree([("o", None, 1.0, None), ("a", "o", 1.0, 1.0), ("b", "a", 1.0, 1.0)])


@pytest.fixture
def star():
    return build_tree([("o", None, 1.0, None), ("c", "o", 1.0, 1.0),
                       ("x", "c", 1.0, 1.0), ("y", "c", 1.0, 1.0), ("z", "c", 1.0, 1.0)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
