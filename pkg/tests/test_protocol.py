import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import within_sigma
from mdiqsdc.entangled import BellLabel, GhzLabel, Variant, identify_label, labels_for, prepare, swapping_table
from mdiqsdc.errors import ConfigurationError, ProtocolError, UsageError
from mdiqsdc.protocol import (
    BITS_PER_POSITION,
    ENCODE_TABLE,
    MASK_ACTION,
    NORMALIZED_LABEL,
    REFERENCE_BELL_LAYOUT,
    REFERENCE_GHZ_LAYOUT,
    Decision,
    Decoy,
    FixedReplace,
    InterceptResend,
    NoAdversary,
    PositionKind,
    PositionRecord,
    ProtocolConfig,
    SecurityReport,
    _ops_to_gates,
    _superdense_ops,
    analytic_miss_probability,
    bits_to_hex,
    bob_mask,
    build_round,
    charlie_announce,
    charlie_roles,
    classify,
    decode_message,
    decode_value,
    draw_preparations,
    encoding_map,
    hex_to_bits,
    normalize_alice,
    parse_adversary,
    parse_preparation,
    retained_roles,
    run_full_session,
    run_security_check,
    transmit,
)
from mdiqsdc.state import StateVector, Z, apply_circuit, make_rng, project_out, symbols_state

S = 1 / math.sqrt(2)


def announced_round(config, layout, seed=0, adversary=None):
    rng = make_rng(seed)
    rnd = build_round(config, rng, layout=layout)
    transmit(rnd, adversary, rng)
    charlie_announce(rnd, rng)
    return rnd, rng


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"decoy_fraction": 0},
            {"decoy_fraction": 1},
            {"num_positions": 3},
            {"error_threshold": 0},
            {"security_shots": 0},
            {"seed": -1},
            {"variant": "w"},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises((ConfigurationError, ValueError)):
            ProtocolConfig(**kwargs)

    def test_round_trip_dict(self):
        cfg = ProtocolConfig(variant="ghz", seed=9)
        assert ProtocolConfig(**{**cfg.to_dict(), "variant": Variant(cfg.to_dict()["variant"])}) == cfg


class TestRoundConstruction:
    def test_no_decoys(self):
        preps = draw_preparations(Variant.BELL, 200, 0.0, make_rng(0))
        assert all(classify(a, b) is PositionKind.PAIR_PAIR for a, b in preps)
        assert {a for a, _ in preps} == {BellLabel.PSI_PLUS, BellLabel.PSI_MINUS}

    def test_all_decoys(self):
        preps = draw_preparations(Variant.GHZ, 200, 1.0, make_rng(0))
        assert all(classify(a, b) is PositionKind.DECOY_DECOY for a, b in preps)
        assert all(len(a.symbols) == 1 and len(b.symbols) == 2 for a, b in preps)

    def test_decoys_uniform_per_qubit(self):
        preps = draw_preparations(Variant.BELL, 4000, 1.0, make_rng(1))
        symbols = "".join(a.symbols + b.symbols for a, b in preps)
        for s in "01+-":
            assert within_sigma(symbols.count(s) / len(symbols), 0.25, len(symbols))

    def test_reference_bell_layout(self):
        rnd = build_round(ProtocolConfig(), make_rng(0), layout=REFERENCE_BELL_LAYOUT)
        kinds = [r.kind for r in rnd.records]
        assert kinds == [
            PositionKind.PAIR_PAIR,
            PositionKind.DECOY_DECOY,
            PositionKind.PAIR_PAIR,
            PositionKind.PAIR_PAIR,
            PositionKind.MIXED,
            PositionKind.MIXED,
        ]
        assert rnd.registers[0].roles == ("A", "C", "B", "D")
        assert rnd.registers[1].roles == ("C", "D")
        assert rnd.registers[4].roles == ("C", "B", "D")

    def test_reference_ghz_layout(self):
        rnd = build_round(ProtocolConfig(variant="ghz"), make_rng(0), layout=REFERENCE_GHZ_LAYOUT)
        assert rnd.registers[0].roles == ("A1", "A2", "C1", "B", "C2", "C3")
        assert rnd.registers[1].roles == ("C1", "C2", "C3")
        assert rnd.registers[5].roles == ("A1", "A2", "C1", "C2", "C3")

    def test_decoy_width_checked(self):
        with pytest.raises(UsageError):
            build_round(ProtocolConfig(), make_rng(0), layout=[("+-", "psi+")])

    def test_parse_preparation(self):
        assert parse_preparation("+-") == Decoy("+-")
        assert parse_preparation("ghz001") is GhzLabel.G001
        with pytest.raises(UsageError):
            parse_preparation("psi")


preparation = st.one_of(
    st.sampled_from(list(BellLabel)),
    st.text(alphabet="01+-", min_size=1, max_size=1).map(Decoy),
)


@given(a=preparation, b=preparation)
def test_classification_partition(a, b):
    kind = classify(a, b)
    flags = [
        kind is PositionKind.PAIR_PAIR,
        kind is PositionKind.DECOY_DECOY,
        kind is PositionKind.MIXED,
    ]
    assert sum(flags) == 1
    assert (kind is PositionKind.PAIR_PAIR) == (not isinstance(a, Decoy) and not isinstance(b, Decoy))
    assert (kind is PositionKind.DECOY_DECOY) == (isinstance(a, Decoy) and isinstance(b, Decoy))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_mixed_positions_never_used(seed):
    config = ProtocolConfig(num_positions=16, decoy_fraction=0.4, min_security_checks=1, seed=seed)
    t = run_full_session(config, hex_to_bits("5a"))
    mixed = {r.index for r in t.records if r.kind is PositionKind.MIXED}
    assert not mixed & {c.position for c in t.security.checks}
    assert not mixed & set(t.security.sifted)
    assert not mixed & set(t.encoded)


class TestTransmit:
    def test_no_adversary_is_identity(self):
        rnd = build_round(ProtocolConfig(), make_rng(0), layout=REFERENCE_BELL_LAYOUT)
        before = {i: r.state.amplitudes.copy() for i, r in rnd.registers.items()}
        transmit(rnd, NoAdversary(), make_rng(1))
        assert all(np.array_equal(before[i], r.state.amplitudes) for i, r in rnd.registers.items())

    def test_fixed_replace_plus_to_zero(self):
        rnd = build_round(ProtocolConfig(), make_rng(0), layout=[("+", "-")])
        transmit(rnd, FixedReplace("alice", "0"), make_rng(1))
        assert rnd.registers[0].state.allclose(symbols_state("0-"))

    def test_fixed_replace_respects_position_and_source(self):
        rnd = build_round(ProtocolConfig(), make_rng(0), layout=[("+", "-"), ("+", "-"), ("0", "-")])
        transmit(rnd, FixedReplace("alice", "1", position=1, source="+"), make_rng(1))
        assert rnd.registers[0].state.allclose(symbols_state("+-"))
        assert rnd.registers[1].state.allclose(symbols_state("1-"))
        assert rnd.registers[2].state.allclose(symbols_state("0-"))

    def test_fixed_replace_on_retained_qubit_rejected(self):
        rnd = build_round(ProtocolConfig(), make_rng(0), layout=REFERENCE_BELL_LAYOUT)
        with pytest.raises(UsageError):
            transmit(rnd, FixedReplace("alice", "0", role="A"), make_rng(1))

    def test_fixed_replace_on_pair_breaks_entanglement(self):
        rnd = build_round(ProtocolConfig(), make_rng(0), layout=[("psi+", "psi+")])
        transmit(rnd, FixedReplace("alice", "+"), make_rng(2))
        reg = rnd.registers[0]
        c = reg.qubit("C")
        # C now carries |+> regardless of A.
        probs_minus = np.linalg.norm(project_out(reg.state, [c], symbols_state("-"))) ** 2
        assert probs_minus == pytest.approx(0, abs=1e-12)

    def test_intercept_resend_on_plus(self):
        counts = {"0": 0, "1": 0}
        rng = make_rng(3)
        for _ in range(2000):
            rnd = build_round(ProtocolConfig(), rng, layout=[("+", "0")])
            transmit(rnd, InterceptResend("Z", 1.0), rng)
            state = rnd.registers[0].state
            for bit in "01":
                if state.allclose(symbols_state(bit + "0")):
                    counts[bit] += 1
        assert sum(counts.values()) == 2000
        assert within_sigma(counts["0"] / 2000, 0.5, 2000)

    def test_parse_adversary(self):
        assert parse_adversary("none") == NoAdversary()
        assert parse_adversary("replace:+to0") == FixedReplace("alice", "0", source="+")
        assert parse_adversary("replace:bob:-to0@4") == FixedReplace("bob", "0", position=4, source="-")
        assert parse_adversary("replace:to1") == FixedReplace("alice", "1")
        assert parse_adversary("intercept:X:0.5") == InterceptResend("X", 0.5)
        assert parse_adversary("intercept:computational") == InterceptResend("Z", 1.0)
        for bad in ["replace:+", "replace:+to2", "intercept:Y", "intercept:Z:2", "steal"]:
            with pytest.raises(UsageError):
                parse_adversary(bad)


class TestCharlie:
    def test_pair_pair_uniform_and_residual(self):
        config = ProtocolConfig()
        shots = 4000
        layout = [("psi+", "psi+")] * shots
        rnd, _ = announced_round(config, layout, seed=5)
        table = swapping_table(Variant.BELL, BellLabel.PSI_PLUS, BellLabel.PSI_PLUS)
        counts = {}
        for rec in rnd.records:
            counts[rec.announcement] = counts.get(rec.announcement, 0) + 1
        for label in BellLabel:
            assert within_sigma(counts.get(label, 0) / shots, 0.25, shots)
        for rec in rnd.records[:50]:
            reg = rnd.registers[rec.index]
            residual = project_out(reg.state, reg.qubits(charlie_roles(Variant.BELL)), prepare(rec.announcement))
            expected = prepare(table.term(rec.announcement).residual)
            assert abs(abs(np.vdot(expected.amplitudes, residual)) - 1) < 1e-12

    def test_plus_minus_decoys(self):
        rnd, _ = announced_round(ProtocolConfig(), [("+", "-")] * 2000, seed=6)
        labels = [r.announcement for r in rnd.records]
        assert set(labels) == {BellLabel.PSI_MINUS, BellLabel.PHI_MINUS}
        assert within_sigma(labels.count(BellLabel.PSI_MINUS) / 2000, 0.5, 2000)

    @pytest.mark.parametrize("layout,variant", [(REFERENCE_BELL_LAYOUT, "bell"), (REFERENCE_GHZ_LAYOUT, "ghz")])
    def test_mixed_residuals_pure(self, layout, variant):
        for seed in range(10):
            rnd, _ = announced_round(ProtocolConfig(variant=variant), layout, seed=seed)
            for rec in rnd.records:
                if rec.kind is PositionKind.MIXED:
                    assert rec.residual_purity == pytest.approx(1, abs=1e-9)


class TestSecurityCheck:
    def test_honest_reference_layout(self):
        config = ProtocolConfig()
        rnd, rng = announced_round(config, REFERENCE_BELL_LAYOUT, seed=1)
        report = run_security_check(rnd.records, rnd.registers, config, rng)
        assert report.decision is Decision.PROCEED
        assert [c.position for c in report.checks] == [1]
        assert report.expected_values == pytest.approx([S])

    @pytest.mark.parametrize("adversary", [FixedReplace("alice", "0"), FixedReplace("bob", "0", source="-")])
    def test_replacement_terminates(self, adversary):
        config = ProtocolConfig()
        for seed in range(20):
            rnd, rng = announced_round(config, REFERENCE_BELL_LAYOUT, seed=seed, adversary=adversary)
            assert run_security_check(rnd.records, rnd.registers, config, rng).decision is Decision.TERMINATE

    def test_minus_to_zero_estimate_near_half(self):
        config = ProtocolConfig()
        rnd, rng = announced_round(config, REFERENCE_BELL_LAYOUT, seed=2, adversary=FixedReplace("bob", "0"))
        (check,) = run_security_check(rnd.records, rnd.registers, config, rng).checks
        assert abs(check.estimate.estimate - 0.5) <= 4 * check.estimate.standard_error

    def test_no_decoys_flags_insufficient_sample(self):
        config = ProtocolConfig()
        rnd, rng = announced_round(config, [("psi+", "psi-")] * 4)
        report = run_security_check(rnd.records, rnd.registers, config, rng)
        assert report.insufficient_sample and report.decision is Decision.TERMINATE

    def test_mixed_basis_decoys_are_sifted(self):
        config = ProtocolConfig()
        rnd, rng = announced_round(config, [("+", "0"), ("0", "1")])
        report = run_security_check(rnd.records, rnd.registers, config, rng)
        assert report.sifted == [0]
        assert [c.position for c in report.checks] == [1]

    def test_requires_announcements(self):
        config = ProtocolConfig()
        rnd = build_round(config, make_rng(0), layout=[("+", "-")])
        with pytest.raises(ProtocolError):
            run_security_check(rnd.records, rnd.registers, config, make_rng(0))

    def test_ghz_expected_half(self):
        config = ProtocolConfig(variant="ghz")
        rnd, rng = announced_round(config, REFERENCE_GHZ_LAYOUT, seed=3)
        report = run_security_check(rnd.records, rnd.registers, config, rng)
        assert report.expected_values == pytest.approx([0.5])

    def test_miss_probability_oracle(self):
        # Replacing |+> by |0> always moves the estimate off 1/sqrt(2): never missed.
        assert analytic_miss_probability("+-", FixedReplace("alice", "0"), Variant.BELL, 0.05) == 0
        assert analytic_miss_probability("+-", NoAdversary(), Variant.BELL, 0.05) == pytest.approx(1)
        # A computational-basis measurement of both Hadamard decoys is missed half of the time.
        assert analytic_miss_probability("+-", InterceptResend("Z"), Variant.BELL, 0.05) == pytest.approx(0.5)
        # ... and never disturbs computational decoys.
        assert analytic_miss_probability("01", InterceptResend("Z"), Variant.BELL, 0.05) == pytest.approx(1)

    def test_intercept_resend_terminate_rate_matches_oracle(self):
        """Empirical Terminate count against the sum of per-session oracle probabilities."""
        adversary = InterceptResend("Z", 1.0)
        expected, variance, terminated = 0.0, 0.0, 0
        for seed in range(150):
            config = ProtocolConfig(num_positions=8, decoy_fraction=0.5, min_security_checks=1, seed=seed)
            t = run_full_session(config, [1, 0], adversary)
            miss = math.prod(
                analytic_miss_probability(c.claimed, adversary, Variant.BELL, config.error_threshold) for c in t.security.checks
            )
            expected += 1 - miss
            variance += miss * (1 - miss)
            terminated += t.decision is Decision.TERMINATE
        assert abs(terminated - expected) <= 4 * math.sqrt(variance) + 1


class TestNormalization:
    def _proceeding(self, variant, layout, seed=0):
        config = ProtocolConfig(variant=variant)
        rnd, _ = announced_round(config, layout, seed=seed)
        report = SecurityReport([], [], 0.05, Decision.PROCEED)
        return config, rnd, report

    def test_requires_proceed(self):
        rnd, _ = announced_round(ProtocolConfig(), REFERENCE_BELL_LAYOUT)
        with pytest.raises(UsageError):
            normalize_alice(rnd.records, rnd.registers, SecurityReport([], [], 0.05, Decision.TERMINATE))
        with pytest.raises(UsageError):
            normalize_alice(rnd.records, rnd.registers, None)

    def test_z_turns_psi_plus_into_psi_minus(self):
        assert apply_circuit(prepare(BellLabel.PSI_PLUS), [Z(0)]).allclose(prepare(BellLabel.PSI_MINUS))
        assert apply_circuit(prepare(GhzLabel.G001), [Z(0)]).allclose(prepare(GhzLabel.G000))

    def test_already_homogeneous_is_untouched(self):
        _, rnd, report = self._proceeding("bell", [("psi-", "psi+"), ("psi-", "psi-")])
        before = {i: r.state.amplitudes.copy() for i, r in rnd.registers.items()}
        labels = normalize_alice(rnd.records, rnd.registers, report)
        assert labels == [BellLabel.PSI_MINUS] * 2
        assert all(np.array_equal(before[i], r.state.amplitudes) for i, r in rnd.registers.items())

    @pytest.mark.parametrize(
        "variant,layout",
        [
            ("bell", [(a, b) for a in ("psi+", "psi-") for b in ("psi+", "psi-")] * 5),
            ("ghz", [(a, b) for a in ("ghz000", "ghz001") for b in ("ghz000", "ghz001")] * 5),
        ],
    )
    def test_normalization_claim(self, variant, layout):
        config, rnd, report = self._proceeding(variant, layout, seed=4)
        normalize_alice(rnd.records, rnd.registers, report)
        v = Variant(variant)
        for rec in rnd.records:
            reg = rnd.registers[rec.index]
            residual = project_out(reg.state, reg.qubits(charlie_roles(v)), prepare(rec.announcement))
            residual = StateVector(residual, normalize=True)
            # The state a normalized Alice preparation would have produced for the same announcement.
            target = swapping_table(v, NORMALIZED_LABEL[v], rec.bob_prep).term(rec.announcement).residual
            assert residual.allclose(prepare(target), atol=1e-12, up_to_phase=True)


def superdense_label(variant, shared, value, masked):
    roles = retained_roles(variant)
    gates = _ops_to_gates(_superdense_ops(variant, value), roles.index)
    if masked:
        gates.append(Z(roles.index("B")))
    return identify_label(apply_circuit(prepare(shared), gates), variant)[0]


ALL_VALUES = {v: [format(i, f"0{BITS_PER_POSITION[v]}b") for i in range(1 << BITS_PER_POSITION[v])] for v in Variant}


class TestSuperdense:
    @pytest.mark.parametrize("variant", list(Variant))
    def test_round_trip_exhaustive(self, variant):
        for shared in labels_for(variant):
            for value in ALL_VALUES[variant]:
                for masked in (False, True):
                    announced = superdense_label(variant, shared, value, masked)
                    assert decode_value(variant, shared, announced, masked) == value

    def test_identity_encoding(self):
        assert encoding_map(Variant.BELL)["00"] == "I"
        assert superdense_label(Variant.BELL, BellLabel.PSI_PLUS, "00", False) is BellLabel.PSI_PLUS
        assert superdense_label(Variant.GHZ, GhzLabel.G000, "000", False) is GhzLabel.G000

    def test_eleven_under_mask_reads_zero_one(self):
        announced = superdense_label(Variant.BELL, BellLabel.PSI_PLUS, "11", True)
        assert announced.bits == "01"
        assert superdense_label(Variant.BELL, BellLabel.PSI_PLUS, "11", False).bits == "11"
        assert decode_value(Variant.BELL, BellLabel.PSI_PLUS, announced, True) == "11"

    def test_encoding_tables_injective(self):
        for variant in Variant:
            for row in ENCODE_TABLE[variant].values():
                assert len(set(row.values())) == len(row)
            assert sorted(MASK_ACTION[variant].values()) == sorted(labels_for(variant))

    @pytest.mark.parametrize("variant", list(Variant))
    def test_mask_opacity(self, variant):
        """Announcement distribution, averaged over Bob's uniform mask, is shared by distinct messages."""
        for shared in labels_for(variant):
            dists = {}
            for value in ALL_VALUES[variant]:
                dist = {}
                for masked in (False, True):
                    roles = retained_roles(variant)
                    gates = _ops_to_gates(_superdense_ops(variant, value), roles.index)
                    if masked:
                        gates.append(Z(roles.index("B")))
                    state = apply_circuit(prepare(shared), gates)
                    for label in labels_for(variant):
                        p = abs(np.vdot(prepare(label).amplitudes, state.amplitudes)) ** 2
                        if p > 1e-12:
                            dist[str(label)] = dist.get(str(label), 0) + 0.5 * round(p, 12)
                dists[value] = tuple(sorted(dist.items()))
            groups = {}
            for value, dist in dists.items():
                groups.setdefault(dist, []).append(value)
            assert all(len(g) == 2 for g in groups.values())
        # The documented pair for the Bell variant.
        assert superdense_label(Variant.BELL, BellLabel.PSI_PLUS, "01", False) is superdense_label(
            Variant.BELL, BellLabel.PSI_PLUS, "11", True
        )

    def test_mask_rate(self):
        rnd = build_round(ProtocolConfig(), make_rng(0), layout=[("psi+", "psi+")] * 4000)
        mask = bob_mask([r.index for r in rnd.records], rnd.registers, make_rng(1))
        assert within_sigma(sum(mask.values()) / 4000, 0.5, 4000)

    def test_missing_announcement(self):
        rec = PositionRecord(0, BellLabel.PSI_PLUS, BellLabel.PSI_PLUS)
        rec.announcement = BellLabel.PSI_PLUS
        with pytest.raises(ProtocolError):
            decode_message({0: None}, {}, [rec], 2)


class TestSessions:
    @pytest.mark.parametrize("seed", range(8))
    def test_random_messages_decode(self, seed):
        rng = random.Random(seed)
        bits = [rng.randint(0, 1) for _ in range(64)]
        t = run_full_session(ProtocolConfig(seed=seed), bits)
        assert t.decision is Decision.PROCEED
        assert t.decoded_bits == bits
        assert any(t.mask.values()) and not all(t.mask.values())

    @pytest.mark.parametrize("seed", range(3))
    def test_ghz_session(self, seed):
        bits = hex_to_bits("c0ffee")
        t = run_full_session(ProtocolConfig(variant="ghz", seed=seed, security_shots=65536), bits)
        assert t.decision is Decision.PROCEED and t.decoded_bits == bits

    def test_replacement_skips_message_phase(self):
        t = run_full_session(ProtocolConfig(seed=1), hex_to_bits("ab"), FixedReplace("alice", "0", source="+"))
        assert t.decision is Decision.TERMINATE
        assert t.decoded_bits is None and not t.encoded and not t.message_announcements

    def test_session_is_deterministic(self):
        a = run_full_session(ProtocolConfig(seed=42), hex_to_bits("1234")).to_dict()
        b = run_full_session(ProtocolConfig(seed=42), hex_to_bits("1234")).to_dict()
        assert a == b

    def test_round_budget_exhausted(self):
        with pytest.raises(ProtocolError):
            run_full_session(ProtocolConfig(num_positions=4, decoy_fraction=0.01, max_rounds=1), [1] * 8)

    def test_message_over_capacity_needs_more_rounds(self):
        t = run_full_session(ProtocolConfig(num_positions=8, seed=3), [1, 0] * 40)
        assert t.rounds > 1 and t.success


@given(st.binary(max_size=16))
def test_hex_round_trip(data):
    text = data.hex()
    assert bits_to_hex(hex_to_bits(text)) == text


def check_false_alarm_probability(expected: float, shots: int, threshold: float) -> float:
    """Exact probability that an honest swap-test check exceeds ``threshold``, from the binomial law of the ancilla."""
    p = 0.5 * (1 + expected**2)
    total = 0.0
    for n0 in range(shots + 1):
        p_hat = n0 / shots
        est = math.sqrt(max(0.0, 2 * p_hat - 1))
        if abs(est - expected) / expected > threshold:
            log_pmf = math.lgamma(shots + 1) - math.lgamma(n0 + 1) - math.lgamma(shots - n0 + 1)
            log_pmf += n0 * math.log(p) + (shots - n0) * math.log1p(-p)
            total += math.exp(log_pmf)
    return total


def test_honest_false_alarm_rates_match_binomial_prediction():
    # Bell checks expect 1/sqrt(2): false alarms are negligible at 8192 shots.
    assert check_false_alarm_probability(S, 8192, 0.05) < 1e-6
    # GHZ checks expect 1/2, where the same relative threshold is only ~2.3 standard errors wide.
    f = check_false_alarm_probability(0.5, 8192, 0.05)
    assert 0.015 < f < 0.03
    terminated, expected, variance = 0, 0.0, 0.0
    for seed in range(60):
        t = run_full_session(ProtocolConfig(variant="ghz", seed=seed), hex_to_bits("a1b2"))
        q = 1 - (1 - f) ** len(t.security.checks)
        expected += q
        variance += q * (1 - q)
        terminated += t.decision is Decision.TERMINATE
    assert abs(terminated - expected) <= 4 * math.sqrt(variance) + 1
