"""
A complete session, honest and attacked
=======================================

Rounds of 64 positions are drawn until there are enough same-basis decoy
checks and enough pair positions for the message; then the check runs and,
if it passes, the message is sent.
"""

from mdiqsdc import FixedReplace, InterceptResend, ProtocolConfig, run_full_session
from mdiqsdc.protocol import bits_to_hex, hex_to_bits

message = hex_to_bits("c0ffee15600d")

for variant, shots in [("bell", 8192), ("ghz", 65536)]:
    t = run_full_session(ProtocolConfig(variant=variant, seed=1, security_shots=shots), message)
    print(f"{variant}: {t.rounds} rounds, {len(t.security.checks)} checks, {t.decision.value}, "
          f"decoded {bits_to_hex(t.decoded_bits)}")

# %%
for adversary in [FixedReplace("alice", "0"), InterceptResend("Z", 1.0), InterceptResend("X", 0.2)]:
    stopped = sum(
        run_full_session(ProtocolConfig(seed=s), message, adversary).decision.value == "terminate" for s in range(20)
    )
    print(f"{adversary.describe():<24} stopped {stopped}/20 sessions")
