"""Three-party MDI-QSDC state machine.

Alice and Bob prepare entangled states or decoy qubits position by position,
send part of each to Charlie, and Charlie announces joint-basis measurement
outcomes.  Decoy positions feed a swap-test security check; pair positions
become shared entanglement that carries a superdense-coded message, hidden
from Charlie by Bob's random Z mask.

Qubit roles per position::

    bell  Alice pair (A, C)        Bob pair (B, D)         Charlie measures (C, D)
    ghz   Alice pair (A1, A2, C1)  Bob pair (B, C2, C3)    Charlie measures (C1, C2, C3)

A decoy replaces a party's whole pair by product qubits on the Charlie-bound
roles only.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

from .entangled import (
    BellLabel,
    GhzLabel,
    Label,
    Variant,
    basis_measure,
    decoy_decomposition,
    identify_label,
    labels_for,
    parse_label,
    prepare,
    swapping_table,
    variant_of,
)
from .errors import ConfigurationError, ProtocolError, UsageError
from .state import (
    GateOp,
    H,
    StateVector,
    X,
    Z,
    apply_circuit,
    make_rng,
    measure,
    purity,
    symbols_state,
)
from .swaptest import DEFAULT_SHOTS, SwapTestVariant, estimate_inner_product

ROLES = {
    Variant.BELL: {"alice_keep": ("A",), "alice_send": ("C",), "bob_keep": ("B",), "bob_send": ("D",)},
    Variant.GHZ: {"alice_keep": ("A1", "A2"), "alice_send": ("C1",), "bob_keep": ("B",), "bob_send": ("C2", "C3")},
}
PAIR_LABELS = {
    Variant.BELL: (BellLabel.PSI_PLUS, BellLabel.PSI_MINUS),
    Variant.GHZ: (GhzLabel.G000, GhzLabel.G001),
}
# Alice's pairs are all brought to this label before encoding.
NORMALIZED_LABEL = {Variant.BELL: BellLabel.PSI_MINUS, Variant.GHZ: GhzLabel.G000}
BITS_PER_POSITION = {Variant.BELL: 2, Variant.GHZ: 3}
DECOY_SYMBOLS = "01+-"


# -- preparations -------------------------------------------------------------

@dataclass(frozen=True)
class Decoy:
    """Product of single-qubit decoys, one symbol from ``0 1 + -`` per qubit."""

    symbols: str

    def __post_init__(self):
        if not self.symbols or any(s not in DECOY_SYMBOLS for s in self.symbols):
            raise UsageError(f"invalid decoy symbols {self.symbols!r}")

    def __str__(self) -> str:
        return self.symbols

    @property
    def basis(self) -> str:
        if all(s in "01" for s in self.symbols):
            return "Z"
        if all(s in "+-" for s in self.symbols):
            return "X"
        return "mixed"

    def state(self) -> StateVector:
        return symbols_state(self.symbols)


Preparation = Union[BellLabel, GhzLabel, Decoy]


def parse_preparation(text: str) -> Preparation:
    """``psi+``/``ghz001`` style labels or decoy symbol strings such as ``+-``."""
    text = str(text).strip()
    if text and all(s in DECOY_SYMBOLS for s in text):
        return Decoy(text)
    return parse_label(text)


class PositionKind(str, enum.Enum):
    PAIR_PAIR = "pair-pair"
    DECOY_DECOY = "decoy-decoy"
    MIXED = "mixed"


def classify(alice: Preparation, bob: Preparation) -> PositionKind:
    a_decoy, b_decoy = isinstance(alice, Decoy), isinstance(bob, Decoy)
    if a_decoy and b_decoy:
        return PositionKind.DECOY_DECOY
    if not a_decoy and not b_decoy:
        return PositionKind.PAIR_PAIR
    return PositionKind.MIXED


@dataclass
class PositionRecord:
    index: int
    alice_prep: Preparation
    bob_prep: Preparation
    kind: PositionKind = field(init=False)
    round: int = 0
    announcement: Label | None = None
    residual_purity: float | None = None

    def __post_init__(self):
        self.kind = classify(self.alice_prep, self.bob_prep)

    @property
    def same_basis(self) -> bool:
        """Decoy-decoy position whose decoy qubits all share one basis."""
        if self.kind is not PositionKind.DECOY_DECOY:
            return False
        basis = {self.alice_prep.basis, self.bob_prep.basis}
        return len(basis) == 1 and "mixed" not in basis

    @property
    def claimed_decoys(self) -> str:
        return self.alice_prep.symbols + self.bob_prep.symbols

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "round": self.round,
            "alice_prep": str(self.alice_prep),
            "bob_prep": str(self.bob_prep),
            "kind": self.kind.value,
            "announcement": None if self.announcement is None else str(self.announcement),
            "residual_purity": None if self.residual_purity is None else round(self.residual_purity, 12),
        }


@dataclass
class Register:
    """Joint state of one position with a role name per qubit."""

    state: StateVector
    roles: tuple[str, ...]
    symbols: dict[str, str] = field(default_factory=dict)
    received: StateVector | None = None

    def qubit(self, role: str) -> int:
        try:
            return self.roles.index(role)
        except ValueError:
            raise UsageError(f"role {role!r} not present in register {self.roles}") from None

    def qubits(self, roles: Iterable[str]) -> list[int]:
        return [self.qubit(r) for r in roles]

    def apply(self, gates: Iterable[GateOp]) -> None:
        self.state = apply_circuit(self.state, gates)


@dataclass
class Round:
    variant: Variant
    records: list[PositionRecord]
    registers: dict[int, Register]


# -- configuration --------------------------------------------------------------

@dataclass(frozen=True)
class ProtocolConfig:
    """Session knobs.

    ``min_security_checks`` is the number of same-basis decoy positions a
    session must accumulate before it may proceed; rounds of
    ``num_positions`` are added until it and the message capacity are met.
    """

    variant: Variant = Variant.BELL
    num_positions: int = 64
    decoy_fraction: float = 0.25
    security_shots: int = DEFAULT_SHOTS
    error_threshold: float = 0.05
    seed: int = 0
    min_security_checks: int = 8
    max_rounds: int = 256

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not 0 < self.decoy_fraction < 1:
            raise ConfigurationError(f"decoy_fraction must lie in (0, 1), got {self.decoy_fraction}")
        if self.num_positions < 4:
            raise ConfigurationError(f"num_positions must be >= 4, got {self.num_positions}")
        if not self.error_threshold > 0:
            raise ConfigurationError("error_threshold must be positive")
        if self.security_shots < 1:
            raise ConfigurationError("security_shots must be >= 1")
        if self.min_security_checks < 1 or self.max_rounds < 1:
            raise ConfigurationError("min_security_checks and max_rounds must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "num_positions": self.num_positions,
            "decoy_fraction": self.decoy_fraction,
            "security_shots": self.security_shots,
            "error_threshold": self.error_threshold,
            "seed": int(self.seed),
            "min_security_checks": self.min_security_checks,
            "max_rounds": self.max_rounds,
        }


# -- adversaries ------------------------------------------------------------------

LINES = ("alice", "bob")


def _prepare_symbol_gates(q: int, symbol: str) -> list[GateOp]:
    return {"0": [], "1": [X(q)], "+": [H(q)], "-": [X(q), H(q)]}[symbol]


def _measure_in_basis(state: StateVector, q: int, basis: str, rng) -> tuple[str, StateVector]:
    if basis == "X":
        state = apply_circuit(state, [H(q)])
    bit, state = measure(state, [q], rng)
    if basis == "X":
        state = apply_circuit(state, [H(q)])
        return ("+" if bit == "0" else "-"), state
    return bit, state


def _single_branches(symbol: str, basis: str) -> list[tuple[float, str]]:
    """Outcome distribution of measuring a decoy symbol in ``basis``."""
    outcomes = "01" if basis == "Z" else "+-"
    if symbol in outcomes:
        return [(1.0, symbol)]
    return [(0.5, outcomes[0]), (0.5, outcomes[1])]


@dataclass(frozen=True)
class NoAdversary:
    def act(self, register, role, line, record, phase, rng) -> None:
        return None

    def branches(self, symbol: str, line: str) -> list[tuple[float, str]]:
        return [(1.0, symbol)]

    def describe(self) -> str:
        return "none"


@dataclass(frozen=True)
class FixedReplace:
    """Swap an in-transit qubit on ``line`` for a fresh ``replacement`` state.

    ``position`` (global index) and ``role`` narrow the target; ``source``
    restricts it to decoy qubits prepared in that symbol.  Unset fields match
    everything.
    """

    line: str
    replacement: str
    position: int | None = None
    source: str | None = None
    role: str | None = None

    def __post_init__(self):
        if self.line not in LINES:
            raise UsageError(f"line must be one of {LINES}, got {self.line!r}")
        for sym in (self.replacement, self.source):
            if sym is not None and (len(sym) != 1 or sym not in DECOY_SYMBOLS):
                raise UsageError(f"invalid single-qubit symbol {sym!r}")

    def matches(self, line: str, position: int | None, symbol: str | None) -> bool:
        if line != self.line:
            return False
        if self.position is not None and position != self.position:
            return False
        return self.source is None or symbol == self.source

    def act(self, register, role, line, record, phase, rng) -> None:
        if self.role is not None and role != self.role:
            return
        if not self.matches(line, record.index, register.symbols.get(role)):
            return
        replace_qubit(register, role, self.replacement, rng)

    def branches(self, symbol: str, line: str) -> list[tuple[float, str]]:
        if self.matches(line, None, symbol):
            return [(1.0, self.replacement)]
        return [(1.0, symbol)]

    def describe(self) -> str:
        src = self.source or "*"
        where = "" if self.position is None else f"@{self.position}"
        return f"replace:{self.line}:{src}to{self.replacement}{where}"


@dataclass(frozen=True)
class InterceptResend:
    """Measure each in-transit qubit in ``basis`` with ``probability`` and forward the result."""

    basis: str = "Z"
    probability: float = 1.0

    def __post_init__(self):
        if self.basis not in ("Z", "X"):
            raise UsageError("intercept basis must be 'Z' (computational) or 'X' (Hadamard)")
        if not 0 <= self.probability <= 1:
            raise UsageError("interception probability must lie in [0, 1]")

    def act(self, register, role, line, record, phase, rng) -> None:
        if rng.random() < self.probability:
            _, register.state = _measure_in_basis(register.state, register.qubit(role), self.basis, rng)

    def branches(self, symbol: str, line: str) -> list[tuple[float, str]]:
        p = self.probability
        out = [(1 - p, symbol)] if p < 1 else []
        out += [(p * w, s) for w, s in _single_branches(symbol, self.basis)]
        return out

    def describe(self) -> str:
        return f"intercept:{self.basis}:{self.probability:g}"


Adversary = Union[NoAdversary, FixedReplace, InterceptResend]


def replace_qubit(register: Register, role: str, symbol: str, rng) -> None:
    """Discard the qubit at ``role`` and put a fresh ``symbol`` state in its place.

    Discarding is modeled by a computational measurement whose outcome is
    forgotten, which leaves the other qubits in the correct reduced ensemble.
    """
    q = register.qubit(role)
    bit, state = measure(register.state, [q], rng)
    gates = [X(q)] if bit == "1" else []
    register.state = apply_circuit(state, gates + _prepare_symbol_gates(q, symbol))


def parse_adversary(text: str | None) -> Adversary:
    """``none``, ``replace:[alice|bob:][<from>]to<to>[@<pos>]`` or ``intercept:<Z|X>[:<p>]``."""
    if text is None or text in ("", "none"):
        return NoAdversary()
    kind, _, rest = text.partition(":")
    if kind == "replace":
        line = "alice"
        if rest.startswith(("alice:", "bob:")):
            line, _, rest = rest.partition(":")
        body, _, pos = rest.partition("@")
        if "to" not in body:
            raise UsageError(f"cannot parse adversary {text!r}: expected '<from>to<to>'")
        src, _, dst = body.rpartition("to")
        try:
            position = int(pos) if pos else None
        except ValueError:
            raise UsageError(f"bad position in adversary {text!r}") from None
        return FixedReplace(line=line, replacement=dst, position=position, source=src or None)
    if kind == "intercept":
        basis, _, prob = rest.partition(":")
        basis = {"z": "Z", "x": "X", "computational": "Z", "hadamard": "X"}.get(basis.lower(), basis)
        try:
            probability = float(prob) if prob else 1.0
        except ValueError:
            raise UsageError(f"bad probability in adversary {text!r}") from None
        return InterceptResend(basis=basis, probability=probability)
    raise UsageError(f"unknown adversary {text!r}")


# -- round construction -------------------------------------------------------------

def draw_preparations(variant: Variant, num_positions: int, decoy_fraction: float, rng) -> list[tuple[Preparation, Preparation]]:
    """Independent Alice/Bob choices: a decoy with probability ``decoy_fraction``, else a pair label."""
    variant = Variant(variant)
    if not 0 <= decoy_fraction <= 1:
        raise ConfigurationError("decoy_fraction must lie in [0, 1]")
    widths = {"alice": len(ROLES[variant]["alice_send"]), "bob": len(ROLES[variant]["bob_send"])}
    pairs = PAIR_LABELS[variant]
    out = []
    for _ in range(num_positions):
        preps = []
        for party in LINES:
            if rng.random() < decoy_fraction:
                syms = "".join(DECOY_SYMBOLS[i] for i in rng.integers(0, 4, size=widths[party]))
                preps.append(Decoy(syms))
            else:
                preps.append(pairs[int(rng.integers(0, 2))])
        out.append(tuple(preps))
    return out


def _party_state(prep: Preparation, party: str, variant: Variant) -> tuple[StateVector, tuple[str, ...]]:
    roles = ROLES[variant]
    if isinstance(prep, Decoy):
        send = roles[f"{party}_send"]
        if len(prep.symbols) != len(send):
            raise UsageError(f"{party} decoy needs {len(send)} symbol(s), got {prep.symbols!r}")
        return prep.state(), send
    if variant_of(prep) is not variant:
        raise UsageError(f"{prep} is not a {variant.value} label")
    return prepare(prep), roles[f"{party}_keep"] + roles[f"{party}_send"]


def make_register(alice: Preparation, bob: Preparation, variant: Variant) -> Register:
    a_state, a_roles = _party_state(alice, "alice", variant)
    b_state, b_roles = _party_state(bob, "bob", variant)
    symbols = {}
    for prep, roles in ((alice, a_roles), (bob, b_roles)):
        if isinstance(prep, Decoy):
            symbols.update(zip(roles, prep.symbols))
    return Register(a_state.tensor(b_state), a_roles + b_roles, symbols)


def build_round(config: ProtocolConfig, rng, *, start: int = 0, round_number: int = 0, layout=None) -> Round:
    """Draw (or take from ``layout``) one round of preparations and build their registers.

    ``layout`` is a sequence of ``(alice, bob)`` preparations, either objects or
    strings accepted by :func:`parse_preparation`.
    """
    variant = config.variant
    if layout is None:
        preps = draw_preparations(variant, config.num_positions, config.decoy_fraction, rng)
    else:
        preps = [tuple(p if not isinstance(p, str) else parse_preparation(p) for p in pair) for pair in layout]
    records, registers = [], {}
    for offset, (alice, bob) in enumerate(preps):
        idx = start + offset
        records.append(PositionRecord(idx, alice, bob, round=round_number))
        registers[idx] = make_register(alice, bob, variant)
    return Round(variant, records, registers)


# -- channel and Charlie ------------------------------------------------------------

def _transit_roles(variant: Variant, register: Register, phase: str) -> list[tuple[str, str]]:
    roles = ROLES[variant]
    which = "send" if phase == "distribution" else "keep"
    out = []
    for line in LINES:
        out += [(line, r) for r in roles[f"{line}_{which}"] if r in register.roles]
    return out


def transmit(rnd: Round, adversary: Adversary | None, rng, *, phase: str = "distribution", positions=None) -> Round:
    """Apply the adversary to every qubit in transit to Charlie.

    ``distribution`` sends the Charlie-bound roles; ``message`` sends the
    retained roles of ``positions``.
    """
    if phase not in ("distribution", "message"):
        raise UsageError(f"unknown phase {phase!r}")
    adversary = adversary or NoAdversary()
    if isinstance(adversary, FixedReplace) and adversary.role is not None:
        allowed = ROLES[rnd.variant][f"{adversary.line}_{'send' if phase == 'distribution' else 'keep'}"]
        if adversary.role not in allowed:
            raise UsageError(f"role {adversary.role!r} is not in transit on the {adversary.line} line during {phase}")
    wanted = None if positions is None else set(positions)
    for rec in rnd.records:
        if wanted is not None and rec.index not in wanted:
            continue
        reg = rnd.registers[rec.index]
        for line, role in _transit_roles(rnd.variant, reg, phase):
            adversary.act(reg, role, line, rec, phase, rng)
    return rnd


def charlie_roles(variant: Variant) -> tuple[str, ...]:
    roles = ROLES[variant]
    return roles["alice_send"] + roles["bob_send"]


def retained_roles(variant: Variant) -> tuple[str, ...]:
    roles = ROLES[variant]
    return roles["alice_keep"] + roles["bob_keep"]


def charlie_announce(rnd: Round, rng) -> list[PositionRecord]:
    """Joint-basis measurement of Charlie's qubits at every position; outcomes are recorded publicly."""
    variant = rnd.variant
    for rec in rnd.records:
        reg = rnd.registers[rec.index]
        reg.received = reg.state
        label, reg.state = basis_measure(variant, reg.state, reg.qubits(charlie_roles(variant)), rng)
        rec.announcement = label
        if rec.kind is PositionKind.MIXED:
            kept = [r for r in reg.roles if r not in charlie_roles(variant)]
            rec.residual_purity = purity(reg.state, reg.qubits(kept))
    return rnd.records


# -- security check -------------------------------------------------------------------

class Decision(str, enum.Enum):
    PROCEED = "proceed"
    TERMINATE = "terminate"


@dataclass
class SecurityCheck:
    position: int
    claimed: str
    announcement: Label
    estimate: "object"
    expected: float
    relative_error: float

    def to_dict(self) -> dict:
        return {
            "position": self.position,
            "claimed": self.claimed,
            "announcement": str(self.announcement),
            "estimate": self.estimate.to_dict(),
            "expected": round(self.expected, 12),
            "relative_error": None if math.isinf(self.relative_error) else round(self.relative_error, 12),
            "impossible_outcome": math.isinf(self.relative_error),
        }


@dataclass
class SecurityReport:
    checks: list[SecurityCheck]
    sifted: list[int]
    threshold: float
    decision: Decision
    insufficient_sample: bool = False

    @property
    def expected_values(self) -> list[float]:
        return [c.expected for c in self.checks]

    @property
    def relative_errors(self) -> list[float]:
        return [c.relative_error for c in self.checks]

    def to_dict(self) -> dict:
        return {
            "decision": self.decision.value,
            "threshold": self.threshold,
            "insufficient_sample": self.insufficient_sample,
            "sifted_positions": list(self.sifted),
            "checks": [c.to_dict() for c in self.checks],
        }


def relative_error(estimate: float, expected: float) -> float:
    if expected <= 0:
        return math.inf
    return abs(estimate - expected) / expected


def run_security_check(records: Sequence[PositionRecord], registers: dict[int, Register], config: ProtocolConfig, rng) -> SecurityReport:
    """Swap-test every same-basis decoy position.

    The decoy qubits as Charlie received them are compared with the basis
    state Charlie announced.  The expected magnitude is the announced
    outcome's amplitude in the decomposition of the claimed decoys; an
    outcome the claimed decoys cannot produce counts as an infinite error.
    Mixed-basis decoy positions are sifted out.  With no usable position the
    report is flagged and the session terminates.
    """
    checks, sifted = [], []
    for rec in records:
        if rec.kind is not PositionKind.DECOY_DECOY:
            continue
        if rec.announcement is None:
            raise ProtocolError(f"position {rec.index} has no announcement yet")
        if not rec.same_basis:
            sifted.append(rec.index)
            continue
        expected = abs(decoy_decomposition(rec.claimed_decoys).amplitude(rec.announcement))
        received = registers[rec.index].received
        est = estimate_inner_product(
            received, prepare(rec.announcement), SwapTestVariant.SINGLE_ANCILLA, config.security_shots, rng
        )
        checks.append(
            SecurityCheck(rec.index, rec.claimed_decoys, rec.announcement, est, expected, relative_error(est.estimate, expected))
        )
    insufficient = not checks
    failed = insufficient or any(c.relative_error > config.error_threshold for c in checks)
    return SecurityReport(
        checks, sifted, config.error_threshold, Decision.TERMINATE if failed else Decision.PROCEED, insufficient
    )


def analytic_miss_probability(claimed: str, adversary: Adversary, variant: Variant, threshold: float) -> float:
    """Probability that a check on ``claimed`` decoys passes under ``adversary``, ignoring shot noise.

    Built symbolically from decoy decompositions, independent of the
    simulated channel.
    """
    variant = Variant(variant)
    n_alice = len(ROLES[variant]["alice_send"])
    honest = decoy_decomposition(claimed)
    per_qubit = [adversary.branches(s, "alice" if i < n_alice else "bob") for i, s in enumerate(claimed)]
    miss = 0.0
    for combo in itertools.product(*per_qubit):
        weight = math.prod(w for w, _ in combo)
        if weight == 0:
            continue
        received = decoy_decomposition("".join(s for _, s in combo))
        for term in received.terms:
            expected = abs(honest.amplitude(term.outcome))
            if relative_error(abs(term.amplitude), expected) <= threshold:
                miss += weight * term.probability
    return miss


# -- messaging ---------------------------------------------------------------------

def require_proceed(report: SecurityReport | None) -> None:
    if report is None or report.decision is not Decision.PROCEED:
        raise UsageError("the message phase requires a passed security check")


def normalize_alice(records: Sequence[PositionRecord], registers: dict[int, Register], report: SecurityReport) -> list[Label]:
    """Z on Alice's first retained qubit wherever her pair differs from the normalized label.

    Returns Alice's label sequence after normalization (homogeneous).
    """
    require_proceed(report)
    out = []
    for rec in records:
        if rec.kind is not PositionKind.PAIR_PAIR:
            continue
        variant = variant_of(rec.alice_prep)
        target = NORMALIZED_LABEL[variant]
        if rec.alice_prep != target:
            reg = registers[rec.index]
            reg.apply([Z(reg.qubit(ROLES[variant]["alice_keep"][0]))])
        out.append(target)
    return out


def _superdense_ops(variant: Variant, value: str) -> list[tuple[str, str]]:
    """(role, gate) list for a message value, applied left to right."""
    pauli = {"00": [], "01": ["X"], "10": ["Z"], "11": ["Z", "X"]}
    if variant is Variant.BELL:
        return [("A", g) for g in pauli[value]]
    ops = [("A1", g) for g in pauli[value[:2]]]
    if value[2] == "1":
        ops.append(("A2", "X"))
    return ops


_GATES = {"X": X, "Z": Z, "H": H}


def _ops_to_gates(ops, qubit_of) -> list[GateOp]:
    return [_GATES[g](qubit_of(role)) for role, g in ops]


def _values(variant: Variant) -> list[str]:
    w = BITS_PER_POSITION[variant]
    return [format(v, f"0{w}b") for v in range(1 << w)]


def _generate_superdense_tables():
    encode, mask = {}, {}
    for variant in Variant:
        retained = retained_roles(variant)
        qubit_of = retained.index
        b = qubit_of("B")
        encode[variant], mask[variant] = {}, {}
        for shared in labels_for(variant):
            row = {}
            for value in _values(variant):
                out = apply_circuit(prepare(shared), _ops_to_gates(_superdense_ops(variant, value), qubit_of))
                row[value] = identify_label(out, variant)[0]
            assert len(set(row.values())) == len(row), f"{variant} superdense map is not injective"
            encode[variant][shared] = row
            mask[variant][shared] = identify_label(apply_circuit(prepare(shared), [Z(b)]), variant)[0]
    return encode, mask


# ENCODE_TABLE[variant][shared label][value] -> label Charlie announces (no mask).
# MASK_ACTION[variant][label] -> label after Bob's Z on B.
ENCODE_TABLE, MASK_ACTION = _generate_superdense_tables()


def encoding_map(variant: Variant) -> dict[str, str]:
    """Published value -> operation map, e.g. ``{"11": "Z(A) X(A)"}``."""
    return {v: " ".join(f"{g}({r})" for r, g in _superdense_ops(variant, v)) or "I" for v in _values(variant)}


def message_positions(records: Sequence[PositionRecord], num_bits: int, variant: Variant) -> list[int]:
    bpp = BITS_PER_POSITION[variant]
    needed = -(-num_bits // bpp)
    pairs = [r.index for r in records if r.kind is PositionKind.PAIR_PAIR]
    if needed > len(pairs):
        raise UsageError(f"message of {num_bits} bits needs {needed} pair positions, only {len(pairs)} available")
    return pairs[:needed]


def _chunks(bits: Sequence[int], bpp: int) -> list[str]:
    text = "".join(str(int(b)) for b in bits)
    text += "0" * (-len(text) % bpp)
    return [text[i : i + bpp] for i in range(0, len(text), bpp)]


def encode_superdense(message_bits: Sequence[int], records: Sequence[PositionRecord], registers: dict[int, Register]) -> dict[int, str]:
    """Apply Alice's encoding operations; returns position -> encoded value.

    The final chunk is zero-padded; the decoder trims it back.
    """
    if not records:
        raise UsageError("no positions to encode into")
    variant = variant_of(next(r.alice_prep for r in records if r.kind is PositionKind.PAIR_PAIR))
    positions = message_positions(records, len(message_bits), variant)
    encoded = {}
    for pos, value in zip(positions, _chunks(message_bits, BITS_PER_POSITION[variant])):
        reg = registers[pos]
        reg.apply(_ops_to_gates(_superdense_ops(variant, value), reg.qubit))
        encoded[pos] = value
    return encoded


def bob_mask(positions: Iterable[int], registers: dict[int, Register], rng) -> dict[int, bool]:
    """Z on Bob's retained qubit with probability 1/2 per position; the choices stay with Bob."""
    mask = {}
    for pos in positions:
        flip = bool(rng.random() < 0.5)
        if flip:
            reg = registers[pos]
            reg.apply([Z(reg.qubit("B"))])
        mask[pos] = flip
    return mask


def charlie_announce_message(rnd: Round, positions: Iterable[int], rng) -> dict[int, Label]:
    variant = rnd.variant
    out = {}
    for pos in positions:
        reg = rnd.registers[pos]
        label, reg.state = basis_measure(variant, reg.state, reg.qubits(retained_roles(variant)), rng)
        out[pos] = label
    return out


def shared_label(record: PositionRecord) -> Label:
    """The Alice-Bob label after swapping, as Bob computes it from public data and his own preparation."""
    if record.announcement is None:
        raise ProtocolError(f"position {record.index} has no swapping announcement")
    variant = variant_of(record.bob_prep)
    term = swapping_table(variant, NORMALIZED_LABEL[variant], record.bob_prep).term(record.announcement)
    if term is None:
        raise ProtocolError(f"announcement {record.announcement} impossible at position {record.index}")
    return term.residual


def decode_value(variant: Variant, shared: Label, announced: Label, masked: bool) -> str:
    variant = Variant(variant)
    if masked:
        announced = MASK_ACTION[variant][announced]
    for value, label in ENCODE_TABLE[variant][shared].items():
        if label == announced:
            return value
    raise ProtocolError(f"no message value yields {announced} from {shared}")


def decode_message(
    announcements: dict[int, Label],
    mask: dict[int, bool],
    records: Sequence[PositionRecord],
    num_bits: int,
) -> list[int]:
    by_index = {r.index: r for r in records}
    bits = ""
    for pos in sorted(announcements):
        if announcements[pos] is None:
            raise ProtocolError(f"missing message-phase announcement at position {pos}")
        rec = by_index[pos]
        variant = variant_of(rec.bob_prep)
        bits += decode_value(variant, shared_label(rec), announcements[pos], mask.get(pos, False))
    if len(bits) < num_bits:
        raise ProtocolError("fewer announcements than message chunks")
    return [int(b) for b in bits[:num_bits]]


# -- orchestration -----------------------------------------------------------------

@dataclass
class RoundTranscript:
    config: ProtocolConfig
    adversary: str
    records: list[PositionRecord]
    rounds: int
    security: SecurityReport
    message_bits: list[int]
    normalized_alice: list[Label] = field(default_factory=list)
    encoded: dict[int, str] = field(default_factory=dict)
    mask: dict[int, bool] = field(default_factory=dict)
    message_announcements: dict[int, Label] = field(default_factory=dict)
    decoded_bits: list[int] | None = None

    @property
    def decision(self) -> Decision:
        return self.security.decision

    @property
    def success(self) -> bool:
        return self.decision is Decision.PROCEED and self.decoded_bits == list(self.message_bits)

    def to_dict(self) -> dict:
        variant = self.config.variant
        return {
            "config": self.config.to_dict(),
            "adversary": self.adversary,
            "rounds": self.rounds,
            "decision": self.decision.value,
            "positions": [r.to_dict() for r in self.records],
            "security": self.security.to_dict(),
            "encoding_map": encoding_map(variant),
            "normalized_alice_label": str(NORMALIZED_LABEL[variant]),
            "message_bits": "".join(map(str, self.message_bits)),
            "encoded": {str(k): v for k, v in self.encoded.items()},
            "mask_positions": sorted(k for k, v in self.mask.items() if v),
            "message_announcements": {str(k): str(v) for k, v in self.message_announcements.items()},
            "decoded_bits": None if self.decoded_bits is None else "".join(map(str, self.decoded_bits)),
            "success": self.success,
        }


def _capacity(records, variant) -> int:
    return BITS_PER_POSITION[variant] * sum(r.kind is PositionKind.PAIR_PAIR for r in records)


def _usable_checks(records) -> int:
    return sum(r.same_basis for r in records)


def run_full_session(
    config: ProtocolConfig,
    message_bits: Sequence[int],
    adversary: Adversary | None = None,
    layout=None,
    rng=None,
) -> RoundTranscript:
    """Run rounds until the message fits and enough checks exist, then check, encode and decode."""
    adversary = adversary or NoAdversary()
    message_bits = [int(b) for b in message_bits]
    if any(b not in (0, 1) for b in message_bits):
        raise UsageError("message bits must be 0 or 1")
    rng = make_rng(config.seed) if rng is None else rng
    variant = config.variant
    size = config.num_positions if layout is None else len(layout)

    rnd = Round(variant, [], {})
    rounds = 0
    while _capacity(rnd.records, variant) < len(message_bits) or _usable_checks(rnd.records) < config.min_security_checks:
        if rounds >= config.max_rounds:
            raise ProtocolError(f"no sufficient round after {rounds} attempts; raise max_rounds or decoy_fraction")
        part = build_round(config, rng, start=rounds * size, round_number=rounds, layout=layout)
        transmit(part, adversary, rng)
        charlie_announce(part, rng)
        rnd.records += part.records
        rnd.registers.update(part.registers)
        rounds += 1

    for rec in rnd.records:
        if rec.kind is PositionKind.MIXED and rec.residual_purity is not None and abs(rec.residual_purity - 1) > 1e-9:
            raise ProtocolError(f"mixed position {rec.index} left an impure residual")

    report = run_security_check(rnd.records, rnd.registers, config, rng)
    transcript = RoundTranscript(config, adversary.describe(), rnd.records, rounds, report, message_bits)
    if report.decision is not Decision.PROCEED:
        return transcript

    transcript.normalized_alice = normalize_alice(rnd.records, rnd.registers, report)
    transcript.encoded = encode_superdense(message_bits, rnd.records, rnd.registers) if message_bits else {}
    positions = list(transcript.encoded)
    transcript.mask = bob_mask(positions, rnd.registers, rng)
    transmit(rnd, adversary, rng, phase="message", positions=positions)
    transcript.message_announcements = charlie_announce_message(rnd, positions, rng)
    transcript.decoded_bits = decode_message(transcript.message_announcements, transcript.mask, rnd.records, len(message_bits))
    return transcript


REFERENCE_BELL_LAYOUT = (
    ("psi+", "psi-"),
    ("+", "-"),
    ("psi+", "psi+"),
    ("psi-", "psi-"),
    ("0", "psi-"),
    ("psi+", "1"),
)
REFERENCE_GHZ_LAYOUT = (
    ("ghz000", "ghz000"),
    ("+", "+-"),
    ("ghz000", "ghz000"),
    ("ghz001", "ghz001"),
    ("0", "ghz000"),
    ("ghz000", "00"),
)


def hex_to_bits(text: str) -> list[int]:
    text = text.strip().lower().removeprefix("0x")
    try:
        value = int(text, 16) if text else 0
    except ValueError:
        raise UsageError(f"message {text!r} is not hexadecimal") from None
    return [int(b) for b in format(value, f"0{4 * len(text)}b")] if text else []


def bits_to_hex(bits: Sequence[int]) -> str:
    if len(bits) % 4:
        raise UsageError("bit count is not a multiple of 4")
    if not bits:
        return ""
    return format(int("".join(map(str, bits)), 2), f"0{len(bits) // 4}x")
