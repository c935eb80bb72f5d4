"""Command-line entry point: ``qcjdr <subcommand> [--config PATH] [--set K=V] ...``.

Exit codes: 0 on success, 2 for usage or validation errors (including an
unreadable config file), 1 for failures during computation.
"""

import argparse
import json
import math
import sys
from pathlib import Path

from ._validation import ParameterError
from .config import ExperimentConfig
from .sweep import (
    CAPACITY_COLUMNS,
    NOISE_COLUMNS,
    UNITARY,
    capacity_rows,
    channel_for,
    csv_text,
    dump_json,
    evaluate_point,
    manifest,
    model_record,
    noise_rows,
    run_sweep,
    sweep_columns,
)


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="PATH", help="YAML configuration file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a configuration entry (dotted key, repeatable)")
    p.add_argument("--out", metavar="PATH", help="output file (stdout when omitted)")
    p.add_argument("--seed", type=int, help="root seed")
    p.add_argument("--jobs", type=int, help="worker processes")
    return p


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="qcjdr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    sub.add_parser("channel", parents=[common], help="transduction loss and added noise")
    q = sub.add_parser("qubits", parents=[common], help="transduced qubit pair at one RMPN")
    q.add_argument("--rmpn", type=float, help="received mean photon number")
    t = sub.add_parser("train", parents=[common], help="train one decoder and save it")
    t.add_argument("--rmpn", type=float, help="received mean photon number")
    t.add_argument("--layers", type=int, help="ansatz depth (default: last configured depth)")
    t.add_argument("--unitary", action="store_true", help="optimize an unconstrained unitary")
    sub.add_parser("sweep", parents=[common], help="decoding error over the configured grid")
    sub.add_parser("capacity", parents=[common], help="per-pulse capacities over RMPN")
    sub.add_parser("noise", parents=[common], help="trained decoders under gate and readout noise")
    return parser


def _load(args):
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.jobs is not None:
        overrides.append(f"jobs={args.jobs}")
    return ExperimentConfig.load(args.config, overrides)


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _manifest_path(cfg, out):
    if cfg["output"]["manifest"]:
        return cfg["output"]["manifest"]
    return None if out is None else str(Path(out).with_suffix(".manifest.json"))


def _json_text(record):
    return json.dumps(record, indent=2, sort_keys=True) + "\n"


def _first_rmpn(cfg, value):
    if value is not None:
        if value < 0 or not math.isfinite(value):
            raise ParameterError("rmpn must be finite and non-negative")
        return value
    values = cfg.rmpn_values()
    if not values:
        raise ParameterError("no rmpn given and the configured grid is empty")
    return values[0]


def cmd_channel(cfg, args):
    ch = channel_for(cfg, cfg["temperature"])
    record = dict(ch.as_record(), temperature=cfg["temperature"])
    _emit(_json_text(record), args.out)


def cmd_qubits(cfg, args):
    from .jc import transduce_bpsk

    rmpn = _first_rmpn(cfg, args.rmpn)
    pair = transduce_bpsk(math.sqrt(rmpn), channel_for(cfg, cfg["temperature"]), cfg.jc_config())
    plus, minus = pair.bloch_vectors()
    record = {"rmpn": rmpn, "temperature": cfg["temperature"], "bloch_plus": plus.tolist(),
              "bloch_minus": minus.tolist(), "t_star": pair.t_star, "tau": pair.tau}
    _emit(_json_text(record), args.out)


def cmd_train(cfg, args):
    rmpn = _first_rmpn(cfg, args.rmpn)
    if args.unitary:
        L = UNITARY
    elif args.layers is not None:
        L = str(args.layers)
    elif cfg.layers:
        L = str(int(cfg.layers[-1]))
    else:
        raise ParameterError("no circuit depth configured; pass --layers or --unitary")
    seed = int(cfg["seed"])
    book, details, _ = evaluate_point(cfg, rmpn, cfg["temperature"], L, seed)
    record = model_record(details["result"], cfg, rmpn, cfg["temperature"], seed, book)
    out = args.out or cfg["output"]["model"]
    if out is None:
        _emit(_json_text(record), None)
    else:
        dump_json(record, out)
        mpath = _manifest_path(cfg, out)
        dump_json(manifest(cfg, "train", {"model": str(out), "J": details["J"]}), mpath)


def _table(cfg, args, command, rows, columns, extra=None):
    out = args.out or cfg["output"]["csv"]
    _emit(csv_text(rows, columns, command), out)
    mpath = _manifest_path(cfg, out)
    if mpath is not None:
        dump_json(manifest(cfg, command, dict(extra or {}, rows=len(rows), csv=out)), mpath)


def cmd_sweep(cfg, args):
    rows = run_sweep(cfg)
    failed = [r for r in rows if r.status != "ok"]
    for r in failed:
        print(f"warning: row {r.index} failed: {r.message}", file=sys.stderr)
    extra = {"row_seeds": [r.seed for r in rows],
             "wall_time": [r.wall_time for r in rows], "failed_rows": len(failed)}
    _table(cfg, args, "sweep", rows, sweep_columns(cfg["output"]["timing"]), extra)


def cmd_capacity(cfg, args):
    _table(cfg, args, "capacity", capacity_rows(cfg), CAPACITY_COLUMNS)


def cmd_noise(cfg, args):
    _table(cfg, args, "noise", noise_rows(cfg), NOISE_COLUMNS)


COMMANDS = {"channel": cmd_channel, "qubits": cmd_qubits, "train": cmd_train,
            "sweep": cmd_sweep, "capacity": cmd_capacity, "noise": cmd_noise}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load(args)
    except (ParameterError, ValueError, TypeError) as exc:
        print(f"qcjdr {args.command}: error: {exc}", file=sys.stderr)
        return 2
    try:
        COMMANDS[args.command](cfg, args)
    except ParameterError as exc:
        print(f"qcjdr {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"qcjdr {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
