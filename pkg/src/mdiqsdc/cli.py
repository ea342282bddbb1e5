"""Command-line front end.

Every command writes one JSON result document (or a CSV table with
``--format csv``).  The document's ``config`` block is the fully resolved
option set and can be fed back through ``--config`` to reproduce the
``result`` payload exactly.

Exit status: 0 success, 1 session proceeded but the message was corrupted,
2 security check terminated, 3 usage error, 4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path

from . import __version__
from .entangled import (
    Variant,
    decoy_decomposition,
    label_from_bits,
    parse_label,
    prepare,
    swapping_table,
    measurement_rotation,
)
from .errors import ConfigurationError, QSDCError, UsageError
from .protocol import (
    BITS_PER_POSITION,
    REFERENCE_BELL_LAYOUT,
    REFERENCE_GHZ_LAYOUT,
    Decision,
    ProtocolConfig,
    _ops_to_gates,
    _superdense_ops,
    decode_value,
    hex_to_bits,
    bits_to_hex,
    parse_adversary,
    parse_preparation,
    relative_error,
    retained_roles,
    run_full_session,
)
from .state import StateVector, Z, apply_circuit, inner_product, make_rng, sample_state, symbols_state
from .swaptest import (
    DEFAULT_SHOTS,
    SwapTestVariant,
    analytic_p_all_zero,
    build_swap_test,
    estimate_inner_product,
)

SCHEMA_VERSION = "1"
OUTPUT_DIR_ENV = "MDIQSDC_OUTPUT_DIR"

# Honest decoy products whose overlap with the received state is the expected check value.
DEFAULT_CLAIMED = {1: "+", 2: "+-", 3: "++-"}

EXIT_OK = 0
EXIT_CORRUPTED = 1
EXIT_TERMINATE = 2
EXIT_USAGE = 3
EXIT_INTERNAL = 4


def parse_state(text: str) -> StateVector:
    """State mini-grammar: runs of ``0 1 + -`` or a Bell/GHZ name (``psi-``, ``ghz001``)."""
    text = str(text).strip()
    if text and all(ch in "01+-" for ch in text):
        return symbols_state(text)
    return prepare(parse_label(text))


def _round(x: float) -> float:
    return round(float(x), 12)


def _amp(z: complex) -> list[float]:
    return [_round(z.real), _round(z.imag)]


# -- option handling --------------------------------------------------------------

def _probability(text) -> float:
    value = float(text)
    if not 0 <= value <= 1:
        raise ValueError("must lie in [0, 1]")
    return value


def _positive_int(text) -> int:
    value = int(text)
    if value < 1:
        raise ValueError("must be >= 1")
    return value


def _seed(text) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise ValueError("must be a 64-bit unsigned integer")
    return value


def _bitstring(text) -> str:
    text = str(text)
    if not text or any(ch not in "01" for ch in text):
        raise ValueError("must be a string of 0/1")
    return text


# dest -> (type, default) per command; None type means pass-through.
COMMON = {
    "seed": (_seed, 0),
    "format": (str, "json"),
    "output": (str, None),
    "threshold": (float, 0.05),
}
OPTIONS = {
    "session": {
        **COMMON,
        "variant": (str, "bell"),
        "positions": (_positive_int, 64),
        "decoy_fraction": (float, 0.25),
        "shots": (_positive_int, DEFAULT_SHOTS),
        "min_checks": (_positive_int, 8),
        "max_rounds": (_positive_int, 256),
        "message": (str, ""),
        "message_file": (str, None),
        "adversary": (str, "none"),
        "layout": (str, None),
    },
    "security-check": {
        **COMMON,
        "states": (None, None),
        "claimed": (str, None),
        "repeats": (_positive_int, 1),
        "shots": (_positive_int, DEFAULT_SHOTS),
        "swap_variant": (str, SwapTestVariant.SINGLE_ANCILLA.value),
    },
    "swap-test": {
        **COMMON,
        "states": (None, None),
        "shots": (_positive_int, DEFAULT_SHOTS),
        "swap_variant": (str, SwapTestVariant.SINGLE_ANCILLA.value),
    },
    "swapping-table": {
        **COMMON,
        "variant": (str, "bell"),
        "labels": (None, []),
        "decoy": (str, None),
    },
    "superdense": {
        **COMMON,
        "variant": (str, "bell"),
        "bits": (_bitstring, None),
        "mask": (bool, False),
        "shared": (str, None),
        "shots": (_positive_int, DEFAULT_SHOTS),
    },
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, *, shots: bool = True, variant: bool = False) -> None:
    p.add_argument("--config", help="JSON file of option values; flags override it")
    p.add_argument("--seed", type=_seed)
    if shots:
        p.add_argument("--shots", type=_positive_int)
    if variant:
        p.add_argument("--variant", choices=[v.value for v in Variant])
    p.add_argument("--threshold", type=float, help="relative-error cutoff for the security decision")
    p.add_argument("--output", help=f"output path (default: stdout, or ${OUTPUT_DIR_ENV}/<command>-<seed>.<fmt>)")
    p.add_argument("--format", choices=["json", "csv"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mdiqsdc", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    kw = {"argument_default": argparse.SUPPRESS}

    p = sub.add_parser("session", help="run a full protocol session", **kw)
    _common(p, variant=True)
    p.add_argument("--positions", type=_positive_int)
    p.add_argument("--decoy-fraction", type=float)
    p.add_argument("--min-checks", type=_positive_int)
    p.add_argument("--max-rounds", type=_positive_int)
    p.add_argument("--message", help="message as hexadecimal digits")
    p.add_argument("--message-file", help="file holding the hexadecimal message")
    p.add_argument("--adversary", help="none | replace:[alice|bob:][<from>]to<to>[@<pos>] | intercept:<Z|X>[:<p>]")
    p.add_argument("--layout", help="'reference' or ';'-separated alice/bob preparations, e.g. 'psi+/psi-;+/-'")

    p = sub.add_parser("security-check", help="swap-test security check rows", **kw)
    _common(p)
    p.add_argument("states", nargs="*", metavar="STATE", help="two operand states")
    p.add_argument("--claimed", help="decoys the sender announced; sets the expected value (default: '+', '+-' or '++-' by width)")
    p.add_argument("--repeats", type=_positive_int)
    p.add_argument("--swap-variant", choices=[v.value for v in SwapTestVariant])

    p = sub.add_parser("swap-test", help="sample a swap test between two states", **kw)
    _common(p)
    p.add_argument("states", nargs="*", metavar="STATE", help="two operand states")
    p.add_argument("--swap-variant", choices=[v.value for v in SwapTestVariant])

    p = sub.add_parser("swapping-table", help="exact swapping / decoy decompositions", **kw)
    _common(p, shots=False, variant=True)
    p.add_argument("labels", nargs="*", metavar="LABEL")
    p.add_argument("--decoy", help="product of decoy symbols to decompose, e.g. '+-'")

    p = sub.add_parser("superdense", help="superdense round trip with optional Z mask", **kw)
    _common(p, variant=True)
    p.add_argument("bits", nargs="?")
    p.add_argument("--mask", action="store_true")
    p.add_argument("--shared", help="label shared by Alice and Bob (default psi+ / ghz000)")
    return parser


def _load_config_file(path: str, command: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise UsageError(f"{path}: top level must be a JSON object")
    if "schema_version" in data:
        # A previous result document: re-run its embedded resolved config.
        if data.get("command") != command:
            raise UsageError(f"{path}: result document is for command {data.get('command')!r}, not {command!r}")
        data = data.get("config")
        if not isinstance(data, dict):
            raise UsageError(f"{path}: result document has no config object")
    known = OPTIONS[command]
    out = {}
    for key, value in data.items():
        dest = key.replace("-", "_")
        if dest not in known:
            raise UsageError(f"{path}: unknown key {key!r} for command {command!r}")
        conv = known[dest][0]
        if value is not None and conv is not None:
            try:
                value = conv(value)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"{path}: key {key!r}: {exc}") from None
        out[dest] = value
    return out


def resolve_options(command: str, namespace: argparse.Namespace) -> dict:
    """Defaults, then config file, then explicit flags."""
    resolved = {dest: default for dest, (_, default) in OPTIONS[command].items()}
    given = {k: v for k, v in vars(namespace).items() if k not in ("command", "config")}
    config_path = getattr(namespace, "config", None)
    if config_path:
        resolved.update(_load_config_file(config_path, command))
    resolved.update(given)
    return resolved


# -- commands -----------------------------------------------------------------------

def _parse_layout(text: str | None, variant: Variant):
    if text is None:
        return None
    if text == "reference":
        return REFERENCE_BELL_LAYOUT if variant is Variant.BELL else REFERENCE_GHZ_LAYOUT
    layout = []
    for cell in text.split(";"):
        alice, sep, bob = cell.partition("/")
        if not sep:
            raise UsageError(f"layout entry {cell!r} must be 'alice/bob'")
        layout.append((parse_preparation(alice), parse_preparation(bob)))
    return tuple(layout)


def _two_states(opts: dict) -> tuple[str, str]:
    states = opts["states"] or []
    if len(states) != 2:
        raise UsageError(f"expected two operand states, got {len(states)}")
    return str(states[0]), str(states[1])


def cmd_session(opts: dict) -> tuple[dict, int, list[list]]:
    variant = Variant(opts["variant"])
    message = opts["message"]
    if opts["message_file"]:
        try:
            message = Path(opts["message_file"]).read_text().strip()
        except OSError as exc:
            raise UsageError(f"cannot read message file: {exc.strerror}") from None
    bits = hex_to_bits(message)
    config = ProtocolConfig(
        variant=variant,
        num_positions=opts["positions"],
        decoy_fraction=opts["decoy_fraction"],
        security_shots=opts["shots"],
        error_threshold=opts["threshold"],
        seed=opts["seed"],
        min_security_checks=opts["min_checks"],
        max_rounds=opts["max_rounds"],
    )
    layout = _parse_layout(opts["layout"], variant)
    transcript = run_full_session(config, bits, parse_adversary(opts["adversary"]), layout=layout)
    payload = transcript.to_dict()
    payload["message_hex"] = message.lower().removeprefix("0x")
    decoded = transcript.decoded_bits
    payload["decoded_hex"] = None if decoded is None or len(decoded) % 4 else bits_to_hex(decoded)
    if transcript.decision is Decision.TERMINATE:
        status = EXIT_TERMINATE
    else:
        status = EXIT_OK if transcript.success else EXIT_CORRUPTED
    rows = [["index", "round", "kind", "alice_prep", "bob_prep", "announcement"]]
    rows += [[r["index"], r["round"], r["kind"], r["alice_prep"], r["bob_prep"], r["announcement"]] for r in payload["positions"]]
    return payload, status, rows


def cmd_security_check(opts: dict) -> tuple[dict, int, list[list]]:
    psi1_text, psi2_text = _two_states(opts)
    psi1, psi2 = parse_state(psi1_text), parse_state(psi2_text)
    claimed_text = opts["claimed"] or DEFAULT_CLAIMED.get(psi1.num_qubits)
    if claimed_text is None:
        raise UsageError("--claimed is required for operands of this width")
    claimed = parse_state(claimed_text)
    variant = SwapTestVariant(opts["swap_variant"])
    expected = abs(inner_product(claimed, psi2))
    analytic = abs(inner_product(psi1, psi2))
    rows_out, status = [], EXIT_OK
    for i in range(opts["repeats"]):
        est = estimate_inner_product(psi1, psi2, variant, opts["shots"], make_rng(opts["seed"], stream=i))
        err = relative_error(est.estimate, expected)
        decision = Decision.PROCEED if err <= opts["threshold"] else Decision.TERMINATE
        if decision is Decision.TERMINATE:
            status = EXIT_TERMINATE
        rows_out.append(
            {
                "run": i + 1,
                "p_all_zero": est.p_all_zero,
                "value": _round(est.estimate),
                "standard_error": _round(est.standard_error),
                "error_rate": None if math.isinf(err) else _round(err),
                "status": decision.value,
                "histogram": est.histogram.to_dict(),
            }
        )
    payload = {
        "states": [psi1_text, psi2_text],
        "claimed": claimed_text,
        "swap_variant": variant.value,
        "expected": _round(expected),
        "analytic_inner_product": _round(analytic),
        "analytic_p_all_zero": _round(analytic_p_all_zero(psi1, psi2, variant)),
        "rows": rows_out,
    }
    table = [["run", "value", "error_rate", "status"]] + [[r["run"], r["value"], r["error_rate"], r["status"]] for r in rows_out]
    return payload, status, table


def cmd_swap_test(opts: dict) -> tuple[dict, int, list[list]]:
    a_text, b_text = _two_states(opts)
    psi1, psi2 = parse_state(a_text), parse_state(b_text)
    variant = SwapTestVariant(opts["swap_variant"])
    circuit = build_swap_test(variant, psi1.num_qubits)
    est = estimate_inner_product(psi1, psi2, variant, opts["shots"], make_rng(opts["seed"]))
    payload = {
        "states": [a_text, b_text],
        "swap_variant": variant.value,
        "num_qubits": circuit.num_qubits,
        "ancillas": list(circuit.ancillas),
        "gates": [str(g) for g in circuit.gates],
        "analytic_inner_product": _round(abs(inner_product(psi1, psi2))),
        "analytic_p_all_zero": _round(analytic_p_all_zero(psi1, psi2, variant)),
        "estimate": est.to_dict(),
    }
    table = [["outcome", "count"]] + [[k, v] for k, v in est.histogram.counts.items()]
    return payload, EXIT_OK, table


def cmd_swapping_table(opts: dict) -> tuple[dict, int, list[list]]:
    variant = Variant(opts["variant"])
    if opts["decoy"]:
        if opts["labels"]:
            raise UsageError("give either labels or --decoy, not both")
        decomposition = decoy_decomposition(opts["decoy"])
    else:
        labels = opts["labels"]
        if len(labels) != 2:
            raise UsageError("swapping-table needs exactly two labels (Alice's and Bob's) or --decoy")
        decomposition = swapping_table(variant, parse_label(labels[0]), parse_label(labels[1]))
    payload = decomposition.to_dict()
    table = [["outcome", "residual", "amplitude_re", "amplitude_im", "probability"]]
    table += [[t["outcome"], t["residual"] or "", *t["amplitude"], t["probability"]] for t in payload["terms"]]
    return payload, EXIT_OK, table


def cmd_superdense(opts: dict) -> tuple[dict, int, list[list]]:
    variant = Variant(opts["variant"])
    bits = opts["bits"]
    if bits is None or len(bits) != BITS_PER_POSITION[variant]:
        raise UsageError(f"{variant.value} superdense coding carries exactly {BITS_PER_POSITION[variant]} bits")
    shared_text = opts["shared"] or ("psi+" if variant is Variant.BELL else "ghz000")
    shared = parse_label(shared_text)
    roles = retained_roles(variant)
    state = apply_circuit(prepare(shared), _ops_to_gates(_superdense_ops(variant, bits), roles.index))
    if opts["mask"]:
        state = apply_circuit(state, [Z(roles.index("B"))])
    measured = list(range(len(roles)))
    rotated = apply_circuit(state, measurement_rotation(variant, measured))
    hist = sample_state(rotated, measured, opts["shots"], make_rng(opts["seed"]))
    announced = label_from_bits(variant, hist.most_common())
    decoded = decode_value(variant, shared, announced, opts["mask"])
    payload = {
        "variant": variant.value,
        "shared": shared_text,
        "bits": bits,
        "mask": opts["mask"],
        "operations": " ".join(f"{g}({r})" for r, g in _superdense_ops(variant, bits)) or "I",
        "histogram": hist.to_dict(),
        "labels": {str(label_from_bits(variant, k)): v for k, v in hist.counts.items()},
        "announced": str(announced),
        "announced_bits": announced.bits,
        "decoded": decoded,
    }
    table = [["outcome", "label", "count"]] + [[k, str(label_from_bits(variant, k)), v] for k, v in hist.counts.items()]
    return payload, EXIT_OK, table


COMMANDS = {
    "session": cmd_session,
    "security-check": cmd_security_check,
    "swap-test": cmd_swap_test,
    "swapping-table": cmd_swapping_table,
    "superdense": cmd_superdense,
}


# -- output --------------------------------------------------------------------------

def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _render(document: dict, table: list[list], fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(table)
        return buf.getvalue()
    return json.dumps(document, indent=2, sort_keys=False) + "\n"


def _destination(command: str, opts: dict) -> Path | None:
    if opts.get("output"):
        return Path(opts["output"])
    env_dir = os.environ.get(OUTPUT_DIR_ENV)
    if env_dir:
        return Path(env_dir) / f"{command}-{opts['seed']}.{opts['format']}"
    return None


def run(argv: list[str] | None = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    namespace = parser.parse_args(argv)
    command = namespace.command
    try:
        opts = resolve_options(command, namespace)
        if opts["format"] not in ("json", "csv"):
            raise UsageError(f"unknown format {opts['format']!r}")
        started = time.perf_counter()
        payload, status, table = COMMANDS[command](opts)
        elapsed = time.perf_counter() - started
    except (UsageError, ConfigurationError) as exc:
        print(f"mdiqsdc {command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QSDCError as exc:
        print(f"mdiqsdc {command}: protocol error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - last-resort guard for the exit-code contract
        print(f"mdiqsdc {command}: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL

    document = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": opts,
        "result": payload,
        "timings": {"elapsed_seconds": round(elapsed, 6)},
    }
    text = _render(document, table, opts["format"])
    dest = _destination(command, opts)
    if dest is None:
        stdout.write(text)
    else:
        _write_atomic(dest, text)
    return status


def main(argv: list[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
