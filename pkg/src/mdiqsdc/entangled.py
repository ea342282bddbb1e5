"""Bell and GHZ families, joint-basis measurements and entanglement swapping.

Conventions::

    psi± = (|00> ± |11>)/√2        phi± = (|01> ± |10>)/√2

    GHZ (a, b, c):  psi_000 = (|000> + |111>)/√2   psi_001 = (|000> - |111>)/√2
                    psi_010 = (|100> + |011>)/√2   psi_011 = (|100> - |011>)/√2
                    psi_100 = (|010> + |101>)/√2   psi_101 = (|010> - |101>)/√2
                    psi_110 = (|110> + |001>)/√2   psi_111 = (|110> - |001>)/√2

The outcome -> label tables used by the measurements are generated at import
time by preparing each label and running the inverse rotation, rather than
written out by hand.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from .errors import UsageError
from .state import (
    ATOL,
    CNOT,
    GateOp,
    H,
    StateVector,
    X,
    Z,
    apply_circuit,
    inner_product,
    measure,
    new_state,
    project_out,
    purity,
    symbols_state,
)


class Variant(str, enum.Enum):
    BELL = "bell"
    GHZ = "ghz"

    @property
    def width(self) -> int:
        """Qubits in one basis state of the family."""
        return 2 if self is Variant.BELL else 3


class BellLabel(str, enum.Enum):
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"

    def __str__(self) -> str:
        return self.value

    @property
    def bits(self) -> str:
        """Computational outcome of the Bell-basis measurement that announces this label."""
        return _BELL_BITS[self]


class GhzLabel(str, enum.Enum):
    G000 = "ghz000"
    G001 = "ghz001"
    G010 = "ghz010"
    G011 = "ghz011"
    G100 = "ghz100"
    G101 = "ghz101"
    G110 = "ghz110"
    G111 = "ghz111"

    def __str__(self) -> str:
        return self.value

    @property
    def abc(self) -> tuple[int, int, int]:
        return tuple(int(ch) for ch in self.value[3:])

    @classmethod
    def from_bits(cls, a: int, b: int, c: int) -> "GhzLabel":
        return cls(f"ghz{a}{b}{c}")

    @property
    def bits(self) -> str:
        return _GHZ_BITS[self]


Label = Union[BellLabel, GhzLabel]


def labels_for(variant: Variant) -> list[Label]:
    return list(BellLabel) if Variant(variant) is Variant.BELL else list(GhzLabel)


def variant_of(label: Label) -> Variant:
    return Variant.BELL if isinstance(label, BellLabel) else Variant.GHZ


def parse_label(text: str) -> Label:
    try:
        return BellLabel(text)
    except ValueError:
        pass
    try:
        return GhzLabel(text)
    except ValueError:
        raise UsageError(f"unknown Bell/GHZ label {text!r}") from None


# -- preparation -------------------------------------------------------------

def bell_circuit(label: BellLabel, q0: int = 0, q1: int = 1) -> list[GateOp]:
    gates = [H(q0), CNOT(q0, q1)]
    if label in (BellLabel.PSI_MINUS, BellLabel.PHI_MINUS):
        gates.append(Z(q0))
    if label in (BellLabel.PHI_PLUS, BellLabel.PHI_MINUS):
        gates.append(X(q1))
    return gates


def ghz_circuit(label: GhzLabel, q0: int = 0, q1: int = 1, q2: int = 2) -> list[GateOp]:
    a, b, c = label.abc
    gates = [H(q0), CNOT(q0, q1), CNOT(q0, q2)]
    if c:
        gates.append(Z(q0))
    # The "+" branch of psi_abc starts with |b a 0>.
    if b:
        gates.append(X(q0))
    if a:
        gates.append(X(q1))
    return gates


@lru_cache(maxsize=None)
def prepare_bell(label: BellLabel) -> StateVector:
    return apply_circuit(new_state(2), bell_circuit(BellLabel(label)))


@lru_cache(maxsize=None)
def prepare_ghz(label: GhzLabel) -> StateVector:
    return apply_circuit(new_state(3), ghz_circuit(GhzLabel(label)))


def prepare(label: Label) -> StateVector:
    return prepare_bell(label) if isinstance(label, BellLabel) else prepare_ghz(label)


# -- measurement -------------------------------------------------------------

def _bell_rotation(qa: int, qb: int) -> list[GateOp]:
    return [CNOT(qa, qb), H(qa)]


def _ghz_rotation(q1: int, q2: int, q3: int) -> list[GateOp]:
    return [CNOT(q1, q3), CNOT(q1, q2), H(q1)]


def _generate_outcomes(labels, rotation) -> dict[str, Label]:
    table = {}
    for label in labels:
        rotated = apply_circuit(prepare(label), rotation)
        probs = rotated.probabilities()
        idx = int(np.argmax(probs))
        assert abs(probs[idx] - 1) < ATOL, f"{label} is not mapped to a basis state"
        bits = format(idx, f"0{rotated.num_qubits}b")
        assert bits not in table
        table[bits] = label
    return table


_BELL_OUTCOMES = _generate_outcomes(BellLabel, _bell_rotation(0, 1))
_GHZ_OUTCOMES = _generate_outcomes(GhzLabel, _ghz_rotation(0, 1, 2))
_BELL_BITS = {v: k for k, v in _BELL_OUTCOMES.items()}
_GHZ_BITS = {v: k for k, v in _GHZ_OUTCOMES.items()}


def label_from_bits(variant: Variant, bits: str) -> Label:
    table = _BELL_OUTCOMES if Variant(variant) is Variant.BELL else _GHZ_OUTCOMES
    try:
        return table[bits]
    except KeyError:
        raise UsageError(f"{bits!r} is not a {variant} measurement outcome") from None


def measurement_rotation(variant: Variant, qubits: Sequence[int]) -> list[GateOp]:
    """Gates mapping the Bell/GHZ basis on ``qubits`` onto the computational basis."""
    if Variant(variant) is Variant.BELL:
        return _bell_rotation(*qubits)
    return _ghz_rotation(*qubits)


def _basis_measure(variant, state, qubits, rng):
    rotation = measurement_rotation(variant, qubits)
    rotated = apply_circuit(state, rotation)
    bits, collapsed = measure(rotated, qubits, rng)
    # Undo the rotation so the measured qubits hold the announced basis state.
    collapsed = apply_circuit(collapsed, reversed(rotation))
    return label_from_bits(variant, bits), collapsed


def bell_measure(state: StateVector, qa: int, qb: int, rng) -> tuple[BellLabel, StateVector]:
    return _basis_measure(Variant.BELL, state, (qa, qb), rng)


def ghz_measure(state: StateVector, q1: int, q2: int, q3: int, rng) -> tuple[GhzLabel, StateVector]:
    return _basis_measure(Variant.GHZ, state, (q1, q2, q3), rng)


def basis_measure(variant: Variant, state: StateVector, qubits: Sequence[int], rng):
    return _basis_measure(Variant(variant), state, tuple(qubits), rng)


def identify_label(vector, variant: Variant, atol: float = 1e-9) -> tuple[Label, complex]:
    """Return ``(label, c)`` with ``vector == c * |label>``; raise if no such label exists."""
    vec = np.asarray(getattr(vector, "amplitudes", vector), dtype=complex)
    norm = np.linalg.norm(vec)
    for label in labels_for(variant):
        c = complex(np.vdot(prepare(label).amplitudes, vec))
        if abs(abs(c) - norm) <= atol:
            return label, c
    raise UsageError("vector is not proportional to a single basis state")


# -- decompositions ----------------------------------------------------------

@dataclass(frozen=True)
class SwapTerm:
    outcome: Label
    residual: Label | None
    amplitude: complex

    @property
    def probability(self) -> float:
        return abs(self.amplitude) ** 2


@dataclass(frozen=True)
class SwapDecomposition:
    """Expansion of a joint state over measurement outcomes on the measured qubits.

    ``terms`` holds the non-vanishing outcomes in basis order.  ``residual`` is
    ``None`` when nothing is left behind (decoy-only inputs).
    """

    variant: Variant
    inputs: tuple[str, str]
    terms: tuple[SwapTerm, ...]

    def term(self, outcome: Label) -> SwapTerm | None:
        for t in self.terms:
            if t.outcome == outcome:
                return t
        return None

    def amplitude(self, outcome: Label) -> complex:
        t = self.term(outcome)
        return 0j if t is None else t.amplitude

    def probabilities(self) -> dict[Label, float]:
        return {t.outcome: t.probability for t in self.terms}

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "inputs": list(self.inputs),
            "terms": [
                {
                    "outcome": str(t.outcome),
                    "outcome_bits": t.outcome.bits,
                    "residual": None if t.residual is None else str(t.residual),
                    "amplitude": [round(t.amplitude.real, 12), round(t.amplitude.imag, 12)],
                    "probability": round(t.probability, 12),
                }
                for t in self.terms
            ],
        }


# Role layout of a two-sided joint state: Alice's qubits then Bob's.
# Bell: (A, C) ⊗ (B, D); GHZ: (A1, A2, C1) ⊗ (B, C2, C3).
SWAP_MEASURED = {Variant.BELL: (1, 3), Variant.GHZ: (2, 4, 5)}
SWAP_RETAINED = {Variant.BELL: (0, 2), Variant.GHZ: (0, 1, 3)}


def swapping_table(variant: Variant, left: Label, right: Label) -> SwapDecomposition:
    """Brute-force entanglement-swapping decomposition.

    ``left`` is Alice's pair on (A, C) / (A1, A2, C1) and ``right`` is Bob's
    on (B, D) / (B, C2, C3).  Each measurement outcome on the Charlie-bound
    qubits is projected out and the residual on the retained qubits is
    identified as ``amplitude * |residual>``.
    """
    variant = Variant(variant)
    if variant_of(left) is not variant or variant_of(right) is not variant:
        raise UsageError(f"labels {left}, {right} do not belong to the {variant.value} family")
    joint = prepare(left).tensor(prepare(right))
    terms = []
    for outcome in labels_for(variant):
        residual = project_out(joint, SWAP_MEASURED[variant], prepare(outcome))
        if np.linalg.norm(residual) <= ATOL:
            continue
        label, amp = identify_label(residual, variant)
        terms.append(SwapTerm(outcome, label, amp))
    return SwapDecomposition(variant, (str(left), str(right)), tuple(terms))


def is_product_state(state: StateVector, atol: float = 1e-9) -> bool:
    return all(abs(purity(state, [q]) - 1) <= atol for q in range(state.num_qubits))


def basis_decomposition(state: StateVector, variant: Variant | None = None, name: str | None = None) -> SwapDecomposition:
    """Expand a 2-qubit (Bell) or 3-qubit (GHZ) state in the joint measurement basis."""
    if variant is None:
        variant = {2: Variant.BELL, 3: Variant.GHZ}.get(state.num_qubits)
        if variant is None:
            raise UsageError(f"no joint basis for a {state.num_qubits}-qubit state")
    variant = Variant(variant)
    if state.num_qubits != variant.width:
        raise UsageError(f"{variant.value} basis needs {variant.width} qubits, got {state.num_qubits}")
    terms = []
    for label in labels_for(variant):
        amp = inner_product(prepare(label), state)
        if abs(amp) > ATOL:
            terms.append(SwapTerm(label, None, amp))
    return SwapDecomposition(variant, (name or "state", ""), tuple(terms))


def decoy_decomposition(decoys: str | StateVector, variant: Variant | None = None) -> SwapDecomposition:
    """Expansion of a product of decoy qubits in the Bell/GHZ basis.

    ``decoys`` is either a symbol string such as ``"+-"`` (Alice's qubit first)
    or a product :class:`StateVector`.
    """
    if isinstance(decoys, str):
        name, state = decoys, symbols_state(decoys)
    else:
        name, state = "state", decoys
    if not is_product_state(state):
        raise UsageError("decoy input must be a product state")
    return basis_decomposition(state, variant, name)


