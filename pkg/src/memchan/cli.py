"""Command-line front end.

Machine-readable JSON goes to stdout (or ``--out``); a short human summary
goes to stderr. Exit codes: 0 pass, 1 check failed, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import rand
from .device import run_sequence, swap_device
from .linalg import ValidationError, default_tol, maximally_mixed
from .repeatability import (
    DEFAULT_THRESHOLD,
    check_repeatable,
    entropy_chain,
    repeatability_bound,
)
from .serialize import (
    SchemaError,
    bound_report_to_json,
    chain_report_to_json,
    channel_from_json,
    device_from_json,
    device_from_spec_json,
    device_to_json,
    dumps,
    real,
    repeatability_report_to_json,
    tomography_result_to_json,
    transcript_entropies_from_json,
    transcript_to_json,
)
from .tomography import PROBE_LABELS, compare_strategies, pauli_probes

DEFAULT_SEED = 0xC0FFEE

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="memchan", description="Simulate devices with memory and check whether they implement the same channel at every use.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="RNG seed (default 0xC0FFEE)")
    common.add_argument("--out", type=Path, default=None, help="write JSON here instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo-swap", parents=[common], help="tomography of the SWAP memory device, both probe orders")
    p.add_argument("--n", "--shots", dest="n", type=_positive_int, default=100, help="uses per probe")
    p.add_argument("--mode", choices=["exact", "sampled"], default="exact")
    p.add_argument("--project", action="store_true", help="project estimates onto CPTP maps")

    p = sub.add_parser("repeat-check", parents=[common], help="check that a device implements a target channel at every use")
    p.add_argument("device", type=Path)
    p.add_argument("target", type=Path)
    p.add_argument("--n", type=_positive_int, default=50)
    p.add_argument("--threshold", type=_positive_float, default=DEFAULT_THRESHOLD)
    p.add_argument("--inputs", choices=["random", "worst", "mixture"], default="random")

    p = sub.add_parser("bound", parents=[common], help="finite-memory repetition limit of a channel")
    p.add_argument("channel", type=Path)
    p.add_argument("--mem-dim", type=_positive_int, required=True)
    p.add_argument("--grid", type=_positive_int, default=201, help="Bloch-ball grid points per axis (qubits)")

    p = sub.add_parser("dilate", parents=[common], help="controlled-unitary device for a random-unitary spec")
    p.add_argument("spec", type=Path)

    p = sub.add_parser("simulate", parents=[common], help="run a device and export the transcript")
    p.add_argument("device", type=Path)
    p.add_argument("--n", type=_positive_int, default=10)
    p.add_argument(
        "--inputs",
        choices=["random", "mixture", *PROBE_LABELS],
        default="random",
        help="random states, the maximally mixed state, or one fixed qubit probe",
    )

    p = sub.add_parser("entropy-audit", parents=[common], help="check the entropy chain of a transcript")
    p.add_argument("transcript", type=Path)
    p.add_argument("--mem-dim", type=_positive_int, required=True)
    return parser


def _load_json(path: Path):
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _emit(payload: dict, out: Path | None) -> None:
    text = dumps(payload)
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_demo_swap(args) -> int:
    dev = swap_device(np.diag([1.0, 0.0]))
    cmp = compare_strategies(dev, args.n, seed=args.seed, mode=args.mode, project=args.project)
    payload = {
        "command": "demo-swap",
        "seed": args.seed,
        "shots_per_probe": args.n,
        "mode": args.mode,
        "memory": "|0><0|",
        "sequential": tomography_result_to_json(cmp.sequential),
        "randomized": tomography_result_to_json(cmp.randomized),
        "inter_estimate_distance": real(cmp.distance),
    }
    _emit(payload, args.out)
    _note(
        f"sequential: {cmp.sequential.dist_to_identity:.4g} from identity; "
        f"randomized: {cmp.randomized.dist_to_depolarizing:.4g} from depolarizing; "
        f"estimates differ by {cmp.distance:.4g}"
    )
    return EXIT_OK


def cmd_repeat_check(args) -> int:
    dev = device_from_json(_load_json(args.device), "device")
    target = channel_from_json(_load_json(args.target), "target")
    report = check_repeatable(dev, target, args.n, args.inputs, args.threshold, seed=args.seed)
    payload = {"command": "repeat-check", "seed": args.seed, **repeatability_report_to_json(report)}
    _emit(payload, args.out)
    if report.repeatable:
        _note(f"repeatable over {args.n} uses (max deviation {report.max_choi_deviation:.3g})")
        return EXIT_OK
    _note(f"deviates from target at use {report.first_deviating_step}")
    return EXIT_FAILED


def cmd_bound(args) -> int:
    ch = channel_from_json(_load_json(args.channel), "channel")
    report = repeatability_bound(ch, args.mem_dim, grid=args.grid)
    payload = {"command": "bound", "seed": args.seed, **bound_report_to_json(report)}
    _emit(payload, args.out)
    _note(f"deficit at I/d = {report.delta_at_mixture:.6g} bits, n_max = {report.n_max_mixture}")
    return EXIT_OK


def cmd_dilate(args) -> int:
    dev = device_from_spec_json(_load_json(args.spec))
    payload = {"command": "dilate", "seed": args.seed, **device_to_json(dev)}
    _emit(payload, args.out)
    _note(f"controlled-unitary device: dim_m={dev.dim_m}, dim_s={dev.dim_s}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    dev = device_from_json(_load_json(args.device), "device")
    d = dev.dim_s
    if args.inputs == "random":
        rng = rand.make_rng(args.seed)
        inputs = [rand.random_state(d, rng) for _ in range(args.n)]
    elif args.inputs == "mixture":
        inputs = [maximally_mixed(d)] * args.n
    else:
        if d != 2:
            raise UsageError(f"probe inputs need a qubit device, this one has dim_s={d}")
        inputs = [pauli_probes()[PROBE_LABELS.index(args.inputs)]] * args.n
    t = run_sequence(dev, inputs)
    payload = {"command": "simulate", "seed": args.seed, "dim_m": dev.dim_m, "dim_s": d, "steps": transcript_to_json(t)}
    _emit(payload, args.out)
    _note(f"{args.n} uses recorded")
    return EXIT_OK


def cmd_entropy_audit(args) -> int:
    raw = _load_json(args.transcript)
    steps = raw.get("steps") if isinstance(raw, dict) else raw
    cols = transcript_entropies_from_json(steps)
    report = entropy_chain(
        cols["inputs"], cols["outputs"], cols["memory"], cols["joint"], args.mem_dim, cols["constant_input"]
    )
    payload = {"command": "entropy-audit", "seed": args.seed, **chain_report_to_json(report)}
    _emit(payload, args.out)
    if report.ok:
        _note(f"entropy chain holds for all {len(cols['inputs'])} prefixes")
        return EXIT_OK
    _note(f"entropy chain violated at prefix n={report.first_violation}: {report.violation}")
    return EXIT_FAILED


COMMANDS = {
    "demo-swap": cmd_demo_swap,
    "repeat-check": cmd_repeat_check,
    "bound": cmd_bound,
    "dilate": cmd_dilate,
    "simulate": cmd_simulate,
    "entropy-audit": cmd_entropy_audit,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        default_tol()
    except ValueError as exc:
        _note(f"error: {exc}")
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, SchemaError, ValidationError, ValueError) as exc:
        _note(f"error: {exc}")
        return EXIT_USAGE


def main_entry() -> None:
    sys.exit(main())


__all__ = ["build_parser", "main"]
