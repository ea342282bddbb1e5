"""
Superdense coding under Bob's mask
==================================

Alice writes two bits onto her half of a shared Bell pair with I, X, Z or
ZX.  Bob flips a coin and maybe applies Z to his half.  Charlie's public
Bell measurement then shows a label that, without knowing the coin, says
nothing about Alice's bits.
"""

from mdiqsdc.entangled import BellLabel, Variant, identify_label, prepare
from mdiqsdc.protocol import ENCODE_TABLE, _ops_to_gates, _superdense_ops, decode_value, encoding_map
from mdiqsdc.state import Z, apply_circuit

shared = BellLabel.PSI_PLUS
print("encoding:", encoding_map(Variant.BELL))

roles = ("A", "B")
for value in ["00", "01", "10", "11"]:
    seen = []
    for masked in (False, True):
        gates = _ops_to_gates(_superdense_ops(Variant.BELL, value), roles.index)
        if masked:
            gates.append(Z(roles.index("B")))
        label, _ = identify_label(apply_circuit(prepare(shared), gates), Variant.BELL)
        seen.append(f"{label} ({label.bits}) -> Bob decodes {decode_value(Variant.BELL, shared, label, masked)}")
    print(f"{value}: plain {seen[0]}; masked {seen[1]}")

# %%
# Each announced label is reachable from two messages, one per mask value.
print({value: str(label) for value, label in ENCODE_TABLE[Variant.BELL][shared].items()})
