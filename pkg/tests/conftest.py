import math

import numpy as np
import pytest
from hypothesis import strategies as st

from mdiqsdc.state import CNOT, CSWAP, H, StateVector, X, Z


def random_state(num_qubits: int, rng: np.random.Generator) -> StateVector:
    amps = rng.normal(size=1 << num_qubits) + 1j * rng.normal(size=1 << num_qubits)
    return StateVector(amps, normalize=True)


def binomial_sigma(p: float, shots: int) -> float:
    return math.sqrt(max(p * (1 - p), 1e-300) / shots)


def within_sigma(observed: float, p: float, shots: int, k: float = 4.0) -> bool:
    return abs(observed - p) <= k * binomial_sigma(p, shots) + 1e-15


@st.composite
def gate_ops(draw, num_qubits: int):
    kinds = ["H", "X", "Z"] + (["CNOT"] if num_qubits >= 2 else []) + (["CSWAP"] if num_qubits >= 3 else [])
    kind = draw(st.sampled_from(kinds))
    arity = {"H": 1, "X": 1, "Z": 1, "CNOT": 2, "CSWAP": 3}[kind]
    qubits = draw(st.permutations(range(num_qubits)))[:arity]
    return {"H": H, "X": X, "Z": Z, "CNOT": CNOT, "CSWAP": CSWAP}[kind](*qubits)


@st.composite
def states(draw, min_qubits: int = 1, max_qubits: int = 4):
    n = draw(st.integers(min_qubits, max_qubits))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_state(n, np.random.default_rng(seed))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Filled by test_acceptance.py; echoed at the end of every pytest run.
ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
