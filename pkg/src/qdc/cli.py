"""Command-line front end: ``qdc estimate | qram | protocol | sense``.

Every command reads an optional JSON config, lets flags override it and
writes CSV or JSON to ``--out`` (stdout by default). Exit codes are 0 on
success, 2 for configuration errors and 3 for simulation-domain errors.

Config file layout::

    {
      "seed": 1,
      "format": "csv",
      "estimate": {"kappa": 9.683, "delay_model": "log", "n_min_log2": 4, "n_max_log2": 20},
      "qram": {"data": [3, 0, 1, 2], "word_width": 2, "unary": [0.6, 0, 0.8, 0]},
      "protocol": {"senders": 2, "receivers": 2, "qdcs": 2, "adversary": "honest", "sessions": 1},
      "sense": {"phi": 1.0, "shots": 10000, "bins": 4}
    }

The ``estimate`` section also accepts every field of
:class:`qdc.estimator.FtCostParams`.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from qdc.config import spawn
from qdc.core import RegisterLayout, fidelity, from_vector, initialize, random_state, tensor
from qdc.errors import ConfigurationError, QdcError, SubspaceViolationError
from qdc.estimator import FtCostParams, sweep, sweep_to_csv, sweep_to_json, threshold_rows
from qdc.privacy import AdversaryModel, run_session
from qdc.qram import (
    ADDRESS,
    BUS,
    QramInstance,
    binary_state,
    classical_query,
    compress_unary,
    decompress,
    leaked_weight,
    log2_exact,
    query_layout,
    unary_state,
)
from qdc.sensing import phase_estimation_run

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN = 0, 2, 3
GLOBAL_KEYS = {"seed", "out", "format"}
ESTIMATE_EXTRA = {"n_min_log2", "n_max_log2"}
SECTION_KEYS = {
    "estimate": {f.name for f in dataclasses.fields(FtCostParams)} | ESTIMATE_EXTRA,
    "qram": {"data", "word_width", "unary", "memory"},
    "protocol": {"senders", "receivers", "qdcs", "pairing", "adversary", "colluders", "sessions", "shares", "word_width"},
    "sense": {"phi", "shots", "bins", "trials", "grid", "R", "T_bin"},
}
DIGITS = 12


class ConfigFileError(ConfigurationError):
    pass


def _line_of(text: str, key: str) -> int | None:
    needle = json.dumps(key)
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigFileError(f"{path}: cannot read config: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigFileError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigFileError(f"{path}:1: top level must be an object")
    for key, value in doc.items():
        if key in GLOBAL_KEYS:
            continue
        if key not in SECTION_KEYS:
            raise ConfigFileError(f"{path}:{_line_of(text, key)}: unknown key {key!r}")
        if not isinstance(value, dict):
            raise ConfigFileError(f"{path}:{_line_of(text, key)}: section {key!r} must be an object")
        for sub in value:
            if sub not in SECTION_KEYS[key]:
                raise ConfigFileError(f"{path}:{_line_of(text, sub)}: unknown key {sub!r} in section {key!r}")
    return doc


def _merge(section: dict, args: argparse.Namespace, names: dict[str, str]) -> dict:
    """Flags win over config values; ``names`` maps flag dest to config key."""
    out = dict(section)
    for dest, key in names.items():
        value = getattr(args, dest, None)
        if value is not None:
            out[key] = value
    return out


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _check_int(value, name: str, low: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < low:
        raise ConfigurationError(f"{name} must be an integer >= {low}, got {value!r}")
    return value


def _round(x: float) -> float:
    return round(float(x), DIGITS) + 0.0


def _amplitudes(state) -> list[list[float]]:
    return [[_round(z.real), _round(z.imag)] for z in state.data]


def _flatten(obj, prefix: str = "") -> list[tuple[str, object]]:
    if isinstance(obj, dict):
        rows = []
        for k in sorted(obj):
            rows += _flatten(obj[k], f"{prefix}.{k}" if prefix else str(k))
        return rows
    if isinstance(obj, (list, tuple)):
        rows = []
        for i, v in enumerate(obj):
            rows += _flatten(v, f"{prefix}[{i}]")
        return rows
    return [(prefix, obj)]


def _render(payload, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"
    lines = ["key,value"]
    for k, v in _flatten(payload):
        text = "" if v is None else json.dumps(v) if isinstance(v, str) else str(v)
        lines.append(f"{k},{text}")
    return "\n".join(lines) + "\n"


# --- commands -------------------------------------------------------------------------


def cmd_estimate(config: dict, args: argparse.Namespace) -> tuple[str, dict]:
    section = _merge(
        config.get("estimate", {}),
        args,
        {"delay_model": "delay_model", "kappa": "kappa", "f_outsourced": "f_outsourced", "n_min": "n_min_log2", "n_max": "n_max_log2"},
    )
    lo = _check_int(section.pop("n_min_log2", 4), "n_min_log2", 1)
    hi = _check_int(section.pop("n_max_log2", 20), "n_max_log2", lo)
    try:
        params = FtCostParams.from_mapping(section)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None
    rows = sweep(params, [2**k for k in range(lo, hi + 1)]) + threshold_rows()
    fmt = args.format or config.get("format") or "csv"
    return (sweep_to_csv(rows) if fmt == "csv" else sweep_to_json(rows)), {}


def _parse_unary(values) -> list[complex]:
    amps = []
    for v in values:
        if isinstance(v, (list, tuple)) and len(v) == 2:
            amps.append(complex(v[0], v[1]))
        elif isinstance(v, (int, float)) and not isinstance(v, bool):
            amps.append(complex(v))
        else:
            raise ConfigurationError(f"amplitude {v!r} must be a number or [re, im]")
    return amps


def _memory_from_bits(strings: list[str]):
    if not strings:
        raise ConfigurationError("memory needs at least one basis string")
    n = len(strings[0])
    if any(len(s) != n or set(s) - {"0", "1"} for s in strings):
        raise ConfigurationError("memory basis strings must be equal-length bit strings")
    log2_exact(n)
    layout = RegisterLayout(tuple((f"D{i + 1}", 1) for i in range(n)))
    vec = np.zeros(layout.dim, complex)
    for s in strings:
        vec[int(s, 2)] += 1
    return from_vector(layout, vec, normalize=True)


def cmd_qram(config: dict, args: argparse.Namespace) -> tuple[str, dict]:
    section = _merge(
        config.get("qram", {}), args, {"data": "data", "word_width": "word_width", "unary": "unary", "memory": "memory"}
    )
    data = section.get("data", [3, 0, 1, 2])
    w = _check_int(section.get("word_width", max(1, max(data, default=1).bit_length())), "word_width", 1)
    db = QramInstance.classical(data, w)
    k = db.address_width
    seed = _seed(config, args)
    address = random_state(RegisterLayout.of(Q1=k), seed=seed)
    vec = np.kron(address.data, np.eye(1, 2**w, 0)[0])
    query_in = from_vector(query_layout(db.n, w), vec)
    query_out = classical_query(query_in, db)
    expected = np.zeros(2 ** (k + w), complex)
    for i, x in enumerate(db.classical_data):
        expected[(i << w) | x] = address.data[i]
    report = {
        "classical_query": {
            "N": db.n,
            "word_width": w,
            "data": list(db.classical_data),
            "registers": {ADDRESS: k, BUS: w},
            "output_amplitudes": _amplitudes(query_out),
            "oracle_fidelity": _round(fidelity(query_out, from_vector(query_out.layout, expected))),
        }
    }

    if "memory" in section:
        memory = _memory_from_bits(section["memory"])
        label = "memory"
    else:
        amps = _parse_unary(section.get("unary", [0.6, 0, 0.8, 0]))
        log2_exact(len(amps))
        norm = math.sqrt(sum(abs(a) ** 2 for a in amps))
        if norm == 0:
            raise ConfigurationError("unary amplitudes are all zero")
        amps = [a / norm for a in amps]
        memory = unary_state(amps)
        label = "unary"
    leak = leaked_weight(_with_address(memory))
    binary, flag = compress_unary(memory)
    back = decompress(binary)
    n = memory.layout.total_qubits
    report["compression"] = {
        "input": label,
        "N": n,
        "leaked_weight": _round(leak),
        "binary_amplitudes": _amplitudes(binary),
        "flag_amplitudes": _amplitudes(flag),
        "target_fidelity": _round(fidelity(binary, binary_state(_one_hot_amplitudes(memory)))),
        "round_trip_fidelity": _round(fidelity(back, memory)),
        "qubits_before": n,
        "qubits_after": log2_exact(n) + 1,
    }
    return _render(report, args.format or config.get("format") or "json"), {}


def _with_address(memory):
    k = log2_exact(memory.layout.total_qubits)
    return tensor(initialize(RegisterLayout.of(Q1=k), "0" * k), memory)


def _one_hot_amplitudes(memory) -> list[complex]:
    n = memory.layout.total_qubits
    return [memory.data[1 << (n - 1 - i)] for i in range(n)]


def _seed(config: dict, args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    return _check_int(seed, "seed", 0)


def _default_pairing(senders: int, receivers: int) -> dict[int, int]:
    m = min(senders, receivers)
    return {i: (i + 1) % m for i in range(m)}


def cmd_protocol(config: dict, args: argparse.Namespace) -> tuple[str, dict]:
    section = _merge(
        config.get("protocol", {}),
        args,
        {
            "senders": "senders",
            "receivers": "receivers",
            "qdcs": "qdcs",
            "adversary": "adversary",
            "colluders": "colluders",
            "sessions": "sessions",
            "shares": "shares",
            "word_width": "word_width",
        },
    )
    senders = _check_int(section.get("senders", 2), "senders", 1)
    receivers = _check_int(section.get("receivers", 2), "receivers", 1)
    shares = _check_int(section.get("shares", 2), "shares", 2)
    qdcs = _check_int(section.get("qdcs", shares), "qdcs", 1)
    sessions = _check_int(section.get("sessions", 1), "sessions", 1)
    w = _check_int(section.get("word_width", 1), "word_width", 1)
    pairing = section.get("pairing")
    if pairing is None:
        pairing = _default_pairing(senders, receivers)
    else:
        try:
            pairing = {int(a): int(b) for a, b in dict(pairing).items()}
        except (TypeError, ValueError):
            raise ConfigurationError("pairing must map sender index to receiver index") from None
    kind = section.get("adversary", "honest")
    colluders = section.get("colluders")
    adversary = AdversaryModel(kind, tuple(colluders)) if colluders is not None else AdversaryModel(kind)

    reports, transcripts = [], []
    for s, rng in enumerate(spawn(_seed(config, args), sessions)):
        r = run_session(senders, receivers, pairing, qdcs, adversary, rng, n_shares=shares, word_width=w)
        reports.append(r)
        transcripts.append(f"# session {s}\n{r.transcript}")
    events = sum(r.detection_events for r in reports)
    decoys = sum(r.decoy_queries for r in reports)
    colluder = [f for r in reports for f in r.colluder_fidelities.values()]
    summary = {
        "sessions": sessions,
        "adversary": kind,
        "detection_events": events,
        "decoy_queries": decoys,
        "detection_rate": events / decoys if decoys else 0.0,
        "expected_detection_rate": float(np.mean([r.expected_detection_rate for r in reports])),
        "min_delivered_fidelity": min(f for r in reports for f in r.delivered_fidelities.values()),
        "max_privacy": max(v for r in reports for v in r.privacy.values()),
        "max_backreaction": max(v for r in reports for v in r.backreaction.values()),
        "min_colluder_fidelity": min(colluder) if colluder else None,
    }
    payload = {"summary": summary, "reports": [r.to_dict() for r in reports]}
    extra = {"transcript": "".join(t if t.endswith("\n") else t + "\n" for t in transcripts)}
    return _render(payload, args.format or config.get("format") or "json"), extra


def cmd_sense(config: dict, args: argparse.Namespace) -> tuple[str, dict]:
    section = _merge(
        config.get("sense", {}),
        args,
        {"phi": "phi", "shots": "shots", "bins": "bins", "trials": "trials", "R": "R", "T_bin": "T_bin"},
    )
    phi = section.get("phi", 1.0)
    if isinstance(phi, bool) or not isinstance(phi, (int, float)) or not 0 <= phi <= math.pi:
        raise ConfigurationError(f"phi must lie in [0, pi], got {phi!r}")
    shots = _check_int(section.get("shots", 10**4), "shots", 1)
    result = phase_estimation_run(
        float(phi),
        _check_int(section.get("bins", 4), "bins", 2),
        shots,
        _seed(config, args),
        trials=_check_int(section.get("trials", 32), "trials", 1),
        grid=_check_int(section.get("grid", 1024), "grid", 2),
        R=_check_int(section.get("R", 4), "R", 1),
        T_bin=_check_int(section.get("T_bin", 256), "T_bin", 1),
    )
    return _render(result.to_dict(), args.format or config.get("format") or "json"), {}


COMMANDS = {"estimate": cmd_estimate, "qram": cmd_qram, "protocol": cmd_protocol, "sense": cmd_sense}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="root RNG seed (default 0)")
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="qdc", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", parents=[common], help="relative time-cost sweep over N")
    est.add_argument("--delay-model", choices=("sqrt", "log", "none"))
    est.add_argument("--kappa", type=float)
    est.add_argument("--f-outsourced", type=float)
    est.add_argument("--n-min", type=int, help="log2 of the smallest N")
    est.add_argument("--n-max", type=int, help="log2 of the largest N")

    qr = sub.add_parser("qram", parents=[common], help="query and compression demos")
    qr.add_argument("--data", type=_int_list, help="classical words, e.g. 3,0,1,2")
    qr.add_argument("--word-width", type=int)
    qr.add_argument("--unary", type=_float_list, help="one-hot amplitudes, e.g. 0.6,0,0.8,0")
    qr.add_argument("--memory", type=_str_list, help="memory basis strings superposed equally, e.g. 0110")

    pr = sub.add_parser("protocol", parents=[common], help="multi-party private communication sessions")
    pr.add_argument("--adversary", choices=("honest", "measuring", "colluding"))
    pr.add_argument("--colluders", type=_int_list, help="colluding data-center indices")
    pr.add_argument("--sessions", type=int)
    pr.add_argument("--senders", type=int)
    pr.add_argument("--receivers", type=int)
    pr.add_argument("--qdcs", type=int)
    pr.add_argument("--shares", type=int)
    pr.add_argument("--word-width", type=int)
    pr.add_argument("--transcript", help="transcript path (default: <out>.transcript.log)")

    se = sub.add_parser("sense", parents=[common], help="two-site phase estimation")
    se.add_argument("--phi", type=float)
    se.add_argument("--shots", type=int)
    se.add_argument("--bins", type=int)
    se.add_argument("--trials", type=int)
    se.add_argument("--R", dest="R", type=int)
    se.add_argument("--T-bin", dest="T_bin", type=int)
    return parser


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    for name in ("seed", "config", "out", "format"):
        if not hasattr(args, name):
            setattr(args, name, None)
    try:
        config = load_config(args.config)
        fmt = args.format or config.get("format")
        if fmt not in (None, "csv", "json"):
            raise ConfigurationError(f"format must be csv or json, got {fmt!r}")
        args.format = fmt
        out = args.out or config.get("out")
        text, extra = COMMANDS[args.command](config, args)
        _write(out, text)
        if "transcript" in extra:
            target = getattr(args, "transcript", None) or (f"{out}.transcript.log" if out else None)
            if target:
                _write(target, extra["transcript"])
    except SubspaceViolationError as exc:
        print(f"qdc: domain error: subspace violation, leaked weight {exc.leaked_weight:.6e}", file=sys.stderr)
        return EXIT_DOMAIN
    except ConfigurationError as exc:
        print(f"qdc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QdcError as exc:
        print(f"qdc: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"qdc: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
