"""Command-line interface.

Each subcommand runs the matching checks from a JSON config file and
writes JSON-lines records (plus an optional CSV table); `run` executes
every configured experiment and `report` summarizes a records file.
Exit codes: 0 all asserted checks passed, 2 an asserted check failed,
1 configuration or runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import CHECKS, ConfigError, emit, load_config, run

SUBCOMMANDS = sorted(CHECKS) + ["run", "report"]


def _build_parser():
    p = argparse.ArgumentParser(prog="cgibbs",
                                description="Exact desk-scale checks for commuting-Hamiltonian Gibbs samplers")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        if name == "report":
            sp = sub.add_parser(name, help="summarize a records file")
            sp.add_argument("records", help="JSON-lines records file")
            continue
        helptext = "run every configured check" if name == "run" else f"run the '{name}' checks"
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", default=None, help="records output path (.jsonl)")
        sp.add_argument("--csv", default=None, help="also write a CSV table here")
    return p


def _report(path: str) -> int:
    rows = []
    with open(path) as fh:
        for line in fh:
            rows.append(json.loads(line))
    width = max((len(r["experiment_id"]) for r in rows), default=10)
    failed = 0
    for r in rows:
        status = "pass" if r["passed"] else "FAIL"
        if not r["passed"]:
            failed += 1
        keys = sorted(r["metrics"])[:4]
        summary = ", ".join(f"{k}={r['metrics'][k]}" for k in keys
                            if not isinstance(r["metrics"][k], dict))
        print(f"{r['experiment_id']:<{width}}  {status}  {summary}")
    print(f"{len(rows)} experiments, {failed} failed")
    return 2 if failed else 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "report":
        return _report(args.records)
    try:
        cfg = load_config(args.config)
        only = None if args.command == "run" else args.command
        records = run(cfg, only=only)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = args.out or cfg.output or "records.jsonl"
    emit(records, out, "jsonl")
    if args.csv:
        emit(records, args.csv, "csv")
    failed = [r for r in records if not r.passed]
    for r in records:
        print(f"{r.experiment_id}: {'pass' if r.passed else 'FAIL'}")
    print(f"wrote {len(records)} records to {out}")
    return 2 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
