import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from gridnav.env import GridWorld  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def empty10():
    return GridWorld(10, 10, (0, 0), (9, 9))


@pytest.fixture
def empty4():
    return GridWorld(4, 4, (0, 0), (3, 3))


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Callable ``report(name, ok, detail)`` that logs one line per criterion."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def report(name, ok, detail=""):
        lines.append((name, bool(ok), detail))
        print(f"{name}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(lines, key=lambda x: x[0]):
        terminalreporter.write_line(f"{name}: {'PASS' if ok else 'FAIL'}  {detail}")
