import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from envkit.model import AxisGrid, ProductGrid  # noqa: E402

_acceptance = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture
def square65():
    return ProductGrid((AxisGrid.lin(-1, 1, 65),), (AxisGrid.lin(-1, 1, 65),))


@pytest.fixture
def square64():
    """64 nodes per axis over [-1, 1]: the jump lines x=0, y=0 fall between nodes."""
    return ProductGrid((AxisGrid.lin(-1, 1, 64),), (AxisGrid.lin(-1, 1, 64),))


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid and report.when == "call":
        _acceptance[report.nodeid.split("::")[-1]] = report.outcome
    elif "test_acceptance" in report.nodeid and report.failed:
        _acceptance[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance):
        mark = "PASS" if _acceptance[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"[{mark}] {name}")
