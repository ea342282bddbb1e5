"""
Entanglement swapping tables
============================

Alice holds a pair on (A, C) and Bob a pair on (B, D).  When Charlie
measures C and D in the Bell basis, A and B end up entangled, and which
Bell state they share depends on both preparations and on the announcement.
"""

import itertools

from mdiqsdc import BellLabel, GhzLabel, Variant, decoy_decomposition, swapping_table

for left, right in itertools.product([BellLabel.PSI_PLUS, BellLabel.PSI_MINUS], repeat=2):
    table = swapping_table(Variant.BELL, left, right)
    rows = ", ".join(f"{t.outcome}->{t.residual} ({t.amplitude.real:+.2f})" for t in table.terms)
    print(f"{left} x {right}: {rows}")

# %%
# The GHZ flavour: Alice keeps two qubits, Bob one, Charlie measures three.
for t in swapping_table(Variant.GHZ, GhzLabel.G000, GhzLabel.G000).terms:
    print(f"  {t.outcome} leaves A1 A2 B in {t.residual}, amplitude {t.amplitude.real:+.2f}")

# %%
# Decoy qubits carry no entanglement, so Charlie's announcement is spread
# over the basis according to their expansion.
for decoys in ["+-", "0-", "++-"]:
    terms = decoy_decomposition(decoys).terms
    print(decoys, {str(t.outcome): round(t.amplitude.real, 4) for t in terms})
