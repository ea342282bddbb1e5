"""Statevector simulator for measurement-device-independent quantum secure direct communication."""

__version__ = "0.1.0"

from .entangled import (
    BellLabel,
    GhzLabel,
    Variant,
    bell_measure,
    decoy_decomposition,
    ghz_measure,
    prepare,
    swapping_table,
)
from .errors import ConfigurationError, ProtocolError, QSDCError, UsageError
from .protocol import (
    Decision,
    FixedReplace,
    InterceptResend,
    NoAdversary,
    ProtocolConfig,
    run_full_session,
    run_security_check,
)
from .state import StateVector, apply_circuit, basis_state, new_state, sample_shots, symbols_state
from .swaptest import SwapTestVariant, build_swap_test, estimate_inner_product

__all__ = [
    "BellLabel",
    "ConfigurationError",
    "Decision",
    "FixedReplace",
    "GhzLabel",
    "InterceptResend",
    "NoAdversary",
    "ProtocolConfig",
    "ProtocolError",
    "QSDCError",
    "StateVector",
    "SwapTestVariant",
    "UsageError",
    "Variant",
    "apply_circuit",
    "basis_state",
    "bell_measure",
    "build_swap_test",
    "decoy_decomposition",
    "estimate_inner_product",
    "ghz_measure",
    "new_state",
    "prepare",
    "run_full_session",
    "run_security_check",
    "sample_shots",
    "swapping_table",
    "symbols_state",
]
