"""Swap-test circuits and the shot-based inner-product estimator.

Register layout for operands of ``k`` qubits: ancillas first, then the
``k`` qubits of the first operand, then the ``k`` qubits of the second.
The all-zero ancilla probability ``p`` gives ``|<a|b>| = sqrt(2p - 1)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import ConfigurationError, UsageError
from .state import (
    CSWAP,
    GateOp,
    H,
    ShotHistogram,
    StateVector,
    apply_circuit,
    as_rng,
    marginal_probabilities,
    new_state,
    sample_state,
)

DEFAULT_SHOTS = 8192
MAX_OPERAND_QUBITS = 3


class SwapTestVariant(str, enum.Enum):
    SINGLE_ANCILLA = "single"
    PER_QUBIT_ANCILLA = "per-qubit"


@dataclass(frozen=True)
class SwapTestCircuit:
    variant: SwapTestVariant
    k: int
    gates: tuple[GateOp, ...]
    ancillas: tuple[int, ...]
    operand1: tuple[int, ...]
    operand2: tuple[int, ...]

    @property
    def num_qubits(self) -> int:
        return len(self.ancillas) + 2 * self.k


def build_swap_test(variant: SwapTestVariant, k: int) -> SwapTestCircuit:
    variant = SwapTestVariant(variant)
    if not isinstance(k, int) or not 1 <= k <= MAX_OPERAND_QUBITS:
        raise ConfigurationError(f"operand width must be 1..{MAX_OPERAND_QUBITS}, got {k!r}")
    m = 1 if variant is SwapTestVariant.SINGLE_ANCILLA else k
    ancillas = tuple(range(m))
    op1 = tuple(range(m, m + k))
    op2 = tuple(range(m + k, m + 2 * k))
    controls = [ancillas[0]] * k if m == 1 else list(ancillas)
    gates = [H(a) for a in ancillas]
    gates += [CSWAP(c, a, b) for c, a, b in zip(controls, op1, op2)]
    gates += [H(a) for a in ancillas]
    return SwapTestCircuit(variant, k, tuple(gates), ancillas, op1, op2)


def _final_state(psi1: StateVector, psi2: StateVector, variant) -> tuple[StateVector, SwapTestCircuit]:
    if psi1.num_qubits != psi2.num_qubits:
        raise UsageError(f"operand width mismatch: {psi1.num_qubits} vs {psi2.num_qubits}")
    circuit = build_swap_test(variant, psi1.num_qubits)
    initial = new_state(len(circuit.ancillas)).tensor(psi1).tensor(psi2)
    return apply_circuit(initial, circuit.gates), circuit


def analytic_p_all_zero(psi1: StateVector, psi2: StateVector, variant=SwapTestVariant.SINGLE_ANCILLA) -> float:
    """Exact all-zero ancilla probability from the final statevector."""
    final, circuit = _final_state(psi1, psi2, variant)
    return float(marginal_probabilities(final, circuit.ancillas)[0])


def estimator(p_all_zero: float) -> float:
    return math.sqrt(max(0.0, 2 * p_all_zero - 1))


def propagated_standard_error(p_all_zero: float, shots: int) -> float:
    """Binomial error of ``p`` pushed through ``sqrt(2p - 1)``; zero at or below the floor."""
    if p_all_zero <= 0.5:
        return 0.0
    se_p = math.sqrt(p_all_zero * (1 - p_all_zero) / shots)
    return se_p / estimator(p_all_zero)


@dataclass(frozen=True)
class InnerProductEstimate:
    p_all_zero: float
    estimate: float
    shots: int
    standard_error: float
    histogram: ShotHistogram | None = None

    @classmethod
    def from_probability(cls, p_all_zero: float, shots: int, histogram=None) -> "InnerProductEstimate":
        return cls(
            p_all_zero=p_all_zero,
            estimate=estimator(p_all_zero),
            shots=shots,
            standard_error=propagated_standard_error(p_all_zero, shots),
            histogram=histogram,
        )

    @property
    def at_floor(self) -> bool:
        """True when sampling noise pushed ``p`` to or below 1/2 and the estimate was clamped."""
        return self.p_all_zero <= 0.5

    def to_dict(self) -> dict:
        out = {
            "p_all_zero": self.p_all_zero,
            "estimate": round(self.estimate, 12),
            "shots": self.shots,
            "standard_error": round(self.standard_error, 12),
            "at_floor": self.at_floor,
        }
        if self.histogram is not None:
            out["histogram"] = self.histogram.to_dict()
        return out


def estimate_inner_product(
    psi1: StateVector,
    psi2: StateVector,
    variant=SwapTestVariant.SINGLE_ANCILLA,
    shots: int = DEFAULT_SHOTS,
    seed=0,
) -> InnerProductEstimate:
    """Sample the swap test ``shots`` times and estimate ``|<psi1|psi2>|``.

    ``seed`` may be an integer or an existing ``numpy.random.Generator``.
    """
    if shots < 1:
        raise UsageError("shots must be >= 1")
    final, circuit = _final_state(psi1, psi2, variant)
    hist = sample_state(final, circuit.ancillas, shots, as_rng(seed))
    p = hist.frequency("0" * len(circuit.ancillas))
    return InnerProductEstimate.from_probability(p, shots, hist)
