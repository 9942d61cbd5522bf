"""Command-line entry point: ``gbpa run|sweep|verify|tabulate-distributions``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import kernels
from .harness import AXES, THREADS_ENV, ExperimentConfig, parse_axis_value, run_experiment, sweep

log = logging.getLogger("gbpa")


def _split_values(raw: str) -> list[str]:
    raw = raw.strip()
    if raw.startswith("["):
        return [json.dumps(v) if isinstance(v, dict) else str(v) for v in json.loads(raw)]
    return [v.strip() for v in raw.split(",") if v.strip()]


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.output:
        cfg.output_path = args.output
    rep = run_experiment(cfg)
    print(json.dumps({**rep.to_dict(), "runtime": round(rep.runtime, 3)}, indent=2, sort_keys=True))
    return 0


def cmd_sweep(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.output:
        cfg.output_path = args.output
    values = [parse_axis_value(args.axis, v) for v in _split_values(args.values)]
    res = sweep(cfg, args.axis, values)
    print(json.dumps(res.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_verify(args) -> int:
    from .verify import verify_suite

    overrides = json.loads(args.overrides) if args.overrides else None
    summary = verify_suite(overrides, only=args.only or None)
    text = json.dumps(summary, indent=2, sort_keys=True, default=float)
    if args.output:
        Path(args.output).write_text(text + "\n")
    for c in summary["checks"]:
        tag = "INFO" if c.get("descriptive") else ("PASS" if c["passed"] else "FAIL")
        print(f"{tag}  {c['name']}  ({c['seconds']:.2f}s)")
    print(f"backend={summary['backend']}  overall={'PASS' if summary['passed'] else 'FAIL'}")
    if args.json:
        print(text)
    return 0 if summary["passed"] else 1


def cmd_tabulate(args) -> int:
    from .tables import format_table, table_passed, tabulate

    Ns = [int(v) for v in _split_values(args.N)]
    rows = tabulate(Ns, args.samples, args.seed)
    print(format_table(rows))
    if args.json:
        Path(args.json).write_text(json.dumps(rows, indent=2, sort_keys=True, default=float) + "\n")
    ok = table_passed(rows)
    print(f"table checks: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gbpa", description="Bandit smoothing experiments and checks.",
                                epilog=f"Set {THREADS_ENV} to control the number of worker threads.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("--config", required=True, help="JSON experiment config")
    r.add_argument("--output", help="output directory (overrides output_path)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="repeat an experiment along one axis")
    s.add_argument("--config", required=True)
    s.add_argument("--axis", required=True, choices=AXES)
    s.add_argument("--values", required=True, help="comma-separated list or JSON array")
    s.add_argument("--output")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run the self-check battery")
    v.add_argument("--only", nargs="*", help="run only these checks")
    v.add_argument("--overrides", help="JSON dict of fault-injection overrides")
    v.add_argument("--output", help="write the JSON summary here")
    v.add_argument("--json", action="store_true", help="also print the JSON summary")
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("tabulate-distributions", help="sup-hazard and E[max] table")
    t.add_argument("--N", default="10,100", help="comma-separated arm counts")
    t.add_argument("--samples", type=int, default=10 ** 6)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--json", help="write rows as JSON to this path")
    t.set_defaults(func=cmd_tabulate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.info("kernel backend: %s", kernels.BACKEND)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
