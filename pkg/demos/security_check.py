"""
Catching a tampered decoy
=========================

A fixed six-position round: pairs, a decoy-decoy
position used for checking, and two mixed positions that get discarded.
An interceptor swaps Bob's |-> decoy for |0>; the swap-test estimate moves
from 1/sqrt(2) to about 1/2 and the session is stopped.
"""

from mdiqsdc import FixedReplace, NoAdversary, ProtocolConfig
from mdiqsdc.protocol import REFERENCE_BELL_LAYOUT, build_round, charlie_announce, run_security_check, transmit
from mdiqsdc.state import make_rng

config = ProtocolConfig()

for adversary in [NoAdversary(), FixedReplace("bob", "0", source="-")]:
    rng = make_rng(3)
    rnd = build_round(config, rng, layout=REFERENCE_BELL_LAYOUT)
    transmit(rnd, adversary, rng)
    charlie_announce(rnd, rng)
    print(adversary.describe())
    for rec in rnd.records:
        print(f"  {rec.index}: {rec.alice_prep!s:>5} {rec.bob_prep!s:>5}  {rec.kind.value:<11} -> {rec.announcement}")
    report = run_security_check(rnd.records, rnd.registers, config, rng)
    for check in report.checks:
        print(
            f"  check @{check.position}: estimate {check.estimate.estimate:.4f}, "
            f"expected {check.expected:.4f}, relative error {check.relative_error:.3f}"
        )
    print("  decision:", report.decision.value)
