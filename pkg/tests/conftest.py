import math

import numpy as np
import pytest
from hypothesis import strategies as st

from bellqss.quantum import QubitId, Role, StateVector

_ACCEPTANCE: list[tuple[int, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion of the build")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        number, title = marker.args
        _ACCEPTANCE.append((number, title, "PASS" if rep.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")


def three_sigma(p: float, n: int) -> float:
    return 3 * math.sqrt(p * (1 - p) / n)


QUBITS4 = (QubitId(Role.T, 0), QubitId(Role.H, 0), QubitId(Role.Tp, 0), QubitId(Role.Hp, 0))


def random_state(rng: np.random.Generator, qubits=QUBITS4) -> StateVector:
    v = rng.normal(size=2 ** len(qubits)) + 1j * rng.normal(size=2 ** len(qubits))
    return StateVector(tuple(qubits), v / np.linalg.norm(v))


@st.composite
def states(draw, qubits=QUBITS4):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_state(np.random.default_rng(seed), qubits)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
