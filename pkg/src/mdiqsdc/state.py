"""Dense statevector core.

Amplitudes are stored big-endian: qubit 0 is the leftmost symbol of a ket,
so ``|q0 q1 ... q_{n-1}>`` lives at index ``int("q0q1...", 2)``.

Every operation returns a new :class:`StateVector`; instances are never
mutated in place.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, UsageError

MAX_QUBITS = 10
ATOL = 1e-12

_SQRT1_2 = 1 / np.sqrt(2)
_SINGLE_QUBIT = {
    "H": np.array([[_SQRT1_2, _SQRT1_2], [_SQRT1_2, -_SQRT1_2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_ARITY = {"H": 1, "X": 1, "Z": 1, "CNOT": 2, "CSWAP": 3}


class StateVector:
    """Normalized complex amplitudes over ``num_qubits`` qubits."""

    __slots__ = ("num_qubits", "amplitudes")

    def __init__(self, amplitudes, *, normalize: bool = False):
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        n = int(round(np.log2(amps.size))) if amps.size else 0
        if amps.size != 1 << n or not 1 <= n <= MAX_QUBITS:
            raise ConfigurationError(
                f"amplitude length {amps.size} is not 2**n for 1 <= n <= {MAX_QUBITS}"
            )
        norm = np.linalg.norm(amps)
        if normalize:
            if norm == 0:
                raise UsageError("cannot normalize the zero vector")
            amps = amps / norm
        elif abs(norm - 1) > 1e-9:
            raise UsageError(f"amplitudes are not normalized (norm={norm:.12g})")
        amps.setflags(write=False)
        self.num_qubits = n
        self.amplitudes = amps

    def __repr__(self) -> str:
        return f"StateVector(num_qubits={self.num_qubits})"

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def tensor(self, other: "StateVector") -> "StateVector":
        """Return ``self ⊗ other``; ``other``'s qubits are appended on the right."""
        return StateVector(np.kron(self.amplitudes, other.amplitudes))

    def allclose(self, other: "StateVector", atol: float = ATOL, up_to_phase: bool = False) -> bool:
        if other.num_qubits != self.num_qubits:
            return False
        if up_to_phase:
            return abs(abs(inner_product(self, other)) - 1) <= atol
        return bool(np.allclose(self.amplitudes, other.amplitudes, atol=atol, rtol=0))


@dataclass(frozen=True)
class GateOp:
    """A gate from the fixed set {H, X, Z, CNOT, CSWAP}.

    ``qubits`` is ``(target,)`` for single-qubit gates, ``(control, target)``
    for CNOT and ``(control, a, b)`` for CSWAP.
    """

    kind: str
    qubits: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in _ARITY:
            raise UsageError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(self.qubits) != _ARITY[self.kind]:
            raise UsageError(f"{self.kind} takes {_ARITY[self.kind]} operand(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise UsageError(f"{self.kind} operands must be distinct, got {self.qubits}")
        if min(self.qubits) < 0:
            raise UsageError(f"negative qubit index in {self.qubits}")

    def __str__(self) -> str:
        return f"{self.kind}({','.join(map(str, self.qubits))})"


def H(q: int) -> GateOp:
    return GateOp("H", (q,))


def X(q: int) -> GateOp:
    return GateOp("X", (q,))


def Z(q: int) -> GateOp:
    return GateOp("Z", (q,))


def CNOT(control: int, target: int) -> GateOp:
    return GateOp("CNOT", (control, target))


def CSWAP(control: int, a: int, b: int) -> GateOp:
    return GateOp("CSWAP", (control, a, b))


@dataclass
class ShotHistogram:
    """Outcome bitstring -> count over ``shots`` repetitions."""

    shots: int
    counts: dict[str, int]
    measured_qubits: tuple[int, ...]

    def __post_init__(self):
        self.measured_qubits = tuple(self.measured_qubits)
        if self.shots < 1:
            raise UsageError("shots must be >= 1")
        if sum(self.counts.values()) != self.shots:
            raise UsageError("counts do not sum to shots")
        width = len(self.measured_qubits)
        if any(len(k) != width for k in self.counts):
            raise UsageError("histogram key width does not match measured qubits")
        self.counts = dict(sorted(self.counts.items()))

    def frequency(self, outcome: str) -> float:
        return self.counts.get(outcome, 0) / self.shots

    def most_common(self) -> str:
        return max(self.counts, key=lambda k: (self.counts[k], k))

    def to_dict(self) -> dict:
        return {
            "shots": self.shots,
            "measured_qubits": list(self.measured_qubits),
            "counts": dict(self.counts),
        }


def make_rng(seed: int, stream: int | None = None) -> np.random.Generator:
    """Deterministic generator for ``seed``; ``stream`` derives independent substreams."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {seed}")
    spawn_key = () if stream is None else (int(stream),)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=spawn_key)))


def as_rng(rng_or_seed) -> np.random.Generator:
    if isinstance(rng_or_seed, np.random.Generator):
        return rng_or_seed
    return make_rng(rng_or_seed)


def new_state(num_qubits: int) -> StateVector:
    """The all-zero computational basis state."""
    if not isinstance(num_qubits, (int, np.integer)) or not 1 <= num_qubits <= MAX_QUBITS:
        raise ConfigurationError(f"num_qubits must be in 1..{MAX_QUBITS}, got {num_qubits!r}")
    amps = np.zeros(1 << num_qubits, dtype=complex)
    amps[0] = 1
    return StateVector(amps)


def basis_state(bits: str) -> StateVector:
    amps = np.zeros(1 << len(bits), dtype=complex)
    amps[int(bits, 2)] = 1
    return StateVector(amps)


def product_state(states: Iterable[StateVector]) -> StateVector:
    states = list(states)
    amps = states[0].amplitudes
    for s in states[1:]:
        amps = np.kron(amps, s.amplitudes)
    return StateVector(amps)


def _bit(indices: np.ndarray, q: int, n: int) -> np.ndarray:
    return (indices >> (n - 1 - q)) & 1


@lru_cache(maxsize=4096)
def _permutation(kind: str, qubits: tuple[int, ...], n: int) -> np.ndarray:
    idx = np.arange(1 << n)
    if kind == "CNOT":
        c, t = qubits
        return idx ^ (_bit(idx, c, n) << (n - 1 - t))
    c, a, b = qubits
    ba, bb = _bit(idx, a, n), _bit(idx, b, n)
    flip = _bit(idx, c, n) & (ba ^ bb)
    return idx ^ (flip << (n - 1 - a)) ^ (flip << (n - 1 - b))


def _apply_amplitudes(amps: np.ndarray, n: int, gate: GateOp) -> np.ndarray:
    if max(gate.qubits) >= n:
        raise UsageError(f"{gate} addresses a qubit outside a {n}-qubit register")
    if gate.kind in _SINGLE_QUBIT:
        (q,) = gate.qubits
        t = amps.reshape(1 << q, 2, 1 << (n - 1 - q))
        return np.einsum("ij,ajb->aib", _SINGLE_QUBIT[gate.kind], t).reshape(-1)
    # CNOT and CSWAP are self-inverse permutations of the basis.
    return amps[_permutation(gate.kind, gate.qubits, n)]


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    return StateVector(_apply_amplitudes(state.amplitudes, state.num_qubits, gate))


def apply_circuit(state: StateVector, gates: Iterable[GateOp]) -> StateVector:
    amps, n = state.amplitudes, state.num_qubits
    for gate in gates:
        amps = _apply_amplitudes(amps, n, gate)
    return StateVector(amps)


def inner_product(a: StateVector, b: StateVector) -> complex:
    """``<a|b>``."""
    if a.num_qubits != b.num_qubits:
        raise UsageError(f"dimension mismatch: {a.num_qubits} vs {b.num_qubits} qubits")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def _check_indices(qubits: Sequence[int], n: int) -> tuple[int, ...]:
    qubits = tuple(int(q) for q in qubits)
    if not qubits:
        raise UsageError("at least one qubit index is required")
    if len(set(qubits)) != len(qubits):
        raise UsageError(f"duplicate qubit indices in {qubits}")
    if min(qubits) < 0 or max(qubits) >= n:
        raise UsageError(f"qubit indices {qubits} out of range for {n} qubits")
    return qubits


def _grouped(amps: np.ndarray, n: int, qubits: tuple[int, ...]) -> np.ndarray:
    """Reshape to (2**len(qubits), rest) with ``qubits`` as the leading axes, in order."""
    rest = [q for q in range(n) if q not in qubits]
    t = amps.reshape((2,) * n).transpose(list(qubits) + rest)
    return t.reshape(1 << len(qubits), -1)


def marginal_probabilities(state: StateVector, qubits: Sequence[int]) -> np.ndarray:
    """Probability of each outcome on ``qubits``; outcome index reads the qubits in the given order."""
    qubits = _check_indices(qubits, state.num_qubits)
    grouped = _grouped(state.amplitudes, state.num_qubits, qubits)
    probs = np.sum(np.abs(grouped) ** 2, axis=1)
    return probs / probs.sum()


def measure(state: StateVector, qubits: Sequence[int], rng) -> tuple[str, StateVector]:
    """Projective computational-basis measurement of ``qubits`` with collapse.

    The full register is kept; the measured qubits are left in the observed
    basis state.
    """
    n = state.num_qubits
    qubits = _check_indices(qubits, n)
    probs = marginal_probabilities(state, qubits)
    outcome = int(as_rng(rng).choice(probs.size, p=probs))
    bits = format(outcome, f"0{len(qubits)}b")
    idx = np.arange(1 << n)
    keep = np.ones(1 << n, dtype=bool)
    for q, b in zip(qubits, bits):
        keep &= _bit(idx, q, n) == int(b)
    amps = np.where(keep, state.amplitudes, 0)
    return bits, StateVector(amps, normalize=True)


def sample_state(state: StateVector, measured: Sequence[int], shots: int, rng) -> ShotHistogram:
    """Sample ``shots`` independent measurements of ``measured`` without collapsing ``state``."""
    if shots < 1:
        raise UsageError("shots must be >= 1")
    measured = _check_indices(measured, state.num_qubits)
    probs = marginal_probabilities(state, measured)
    draws = as_rng(rng).multinomial(shots, probs)
    width = len(measured)
    counts = {format(i, f"0{width}b"): int(c) for i, c in enumerate(draws) if c}
    return ShotHistogram(shots=shots, counts=counts, measured_qubits=measured)


def sample_shots(
    circuit: Sequence[GateOp],
    measured: Sequence[int],
    shots: int,
    seed: int,
    num_qubits: int | None = None,
    initial: StateVector | None = None,
) -> ShotHistogram:
    """Run ``circuit`` from ``|0...0>`` (or ``initial``) and sample ``shots`` outcomes of ``measured``."""
    if not measured:
        raise UsageError("measured qubit list must not be empty")
    if initial is None:
        if num_qubits is None:
            used = [q for g in circuit for q in g.qubits] + list(measured)
            num_qubits = max(used) + 1
        initial = new_state(num_qubits)
    final = apply_circuit(initial, circuit)
    return sample_state(final, measured, shots, make_rng(seed))


def reduced_density_matrix(state: StateVector, keep: Sequence[int]) -> np.ndarray:
    """Partial trace over every qubit not in ``keep``."""
    keep = _check_indices(keep, state.num_qubits)
    m = _grouped(state.amplitudes, state.num_qubits, keep)
    return m @ m.conj().T


def purity(state: StateVector, keep: Sequence[int]) -> float:
    rho = reduced_density_matrix(state, keep)
    return float(np.real(np.trace(rho @ rho)))


def project_out(state: StateVector, qubits: Sequence[int], target: StateVector) -> np.ndarray:
    """Unnormalized ``(<target|_qubits ⊗ I) |state>`` over the remaining qubits (ascending order)."""
    qubits = _check_indices(qubits, state.num_qubits)
    if target.num_qubits != len(qubits):
        raise UsageError("projector width does not match the qubit list")
    grouped = _grouped(state.amplitudes, state.num_qubits, qubits)
    return target.amplitudes.conj() @ grouped


def single_qubit(symbol: str) -> StateVector:
    """One of ``0``, ``1``, ``+``, ``-``."""
    try:
        return _SYMBOLS[symbol]
    except KeyError:
        raise UsageError(f"unknown single-qubit symbol {symbol!r}") from None


_SYMBOLS = {
    "0": StateVector([1, 0]),
    "1": StateVector([0, 1]),
    "+": StateVector([_SQRT1_2, _SQRT1_2]),
    "-": StateVector([_SQRT1_2, -_SQRT1_2]),
}


def symbols_state(symbols: str) -> StateVector:
    """Product state written as a run of single-qubit symbols, e.g. ``"+-"``."""
    if not symbols:
        raise UsageError("empty product-state string")
    return product_state(single_qubit(s) for s in symbols)


__all__ = [
    "ATOL",
    "CNOT",
    "CSWAP",
    "GateOp",
    "H",
    "MAX_QUBITS",
    "ShotHistogram",
    "StateVector",
    "X",
    "Z",
    "apply_circuit",
    "apply_gate",
    "as_rng",
    "basis_state",
    "inner_product",
    "make_rng",
    "marginal_probabilities",
    "measure",
    "new_state",
    "product_state",
    "project_out",
    "purity",
    "reduced_density_matrix",
    "sample_shots",
    "sample_state",
    "single_qubit",
    "symbols_state",
]
