"""Command line: validate configs, run them, diff traces."""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path
from typing import Optional

from .config import ConfigError, load_config
from .domain import ZERO, validate_network
from .mediator import global_benefit
from .planner import CostBreakdown
from .protocol import DecodeError, decode_trace
from .simulator import RunResult, export_trace, run_to_quiescence

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_DEADLOCK = 0, 1, 2, 3


def cost_totals(result: RunResult) -> dict:
    out = {}
    for vid, pa in sorted(result.network.planners.items()):
        total = CostBreakdown()
        for rec in pa.ledger.values():
            if rec.status == "committed":
                total = total + rec.cost
        out[vid] = total
    return out


def render_report(result: RunResult) -> str:
    buf = io.StringIO()
    w = buf.write
    w(f"status: {result.status}\n")
    if result.diagnosis:
        w(f"diagnosis: {result.diagnosis}\n")
    w("\norders\n")
    for oid, outcome in sorted(result.outcomes.items()):
        w(f"  {oid}: {outcome}\n")
    if result.steps:
        w("\nescalation chain\n")
        for step in result.steps:
            w(f"  {step}\n")
    w("\nplanned costs (production / overtime / subcontract / lateness)\n")
    for vid, c in cost_totals(result).items():
        w(f"  {vid}: {c.production} / {c.overtime} / {c.subcontract} / {c.lateness_penalty}\n")
    w("\naccounts (selling / costs / absorbed deficit)\n")
    for vid, acc in sorted(result.accounts.vens.items()):
        w(f"  {vid}: {acc.selling} / {acc.costs} / {acc.absorbed}\n")
    benefit = global_benefit(result.accounts)
    w(f"\nglobal benefit: {benefit}\n")
    w(f"benefit constraint (selling - costs >= 0): {'holds' if benefit >= ZERO else 'VIOLATED'}\n")
    if result.violations:
        w("\nprotocol violations\n")
        for v in result.violations:
            w(f"  {v}\n")
    return buf.getvalue()


def render_csv(result: RunResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["ven", "selling", "costs", "absorbed", "production", "overtime", "subcontract", "lateness"])
    costs = cost_totals(result)
    for vid, acc in sorted(result.accounts.vens.items()):
        c = costs.get(vid, CostBreakdown())
        writer.writerow([vid, acc.selling, acc.costs, acc.absorbed, c.production, c.overtime, c.subcontract,
                         c.lateness_penalty])
    return buf.getvalue()


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    violations = validate_network(cfg.network)
    for v in violations:
        print(v)
    if not violations:
        print("ok")
    return EXIT_FAIL if violations else EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    violations = validate_network(cfg.network)
    if violations:
        for v in violations:
            print(v, file=sys.stderr)
        return EXIT_INPUT
    strict = cfg.mode == "strict" if args.mode is None else args.mode == "strict"
    result = run_to_quiescence(cfg.network, cfg.orders, strict=strict)
    report = render_report(result)
    try:
        if args.trace:
            Path(args.trace).write_text(export_trace(result.trace))
        if args.report:
            Path(args.report).write_text(report)
            Path(args.csv or Path(args.report).with_suffix(".csv")).write_text(render_csv(result))
        elif args.csv:
            Path(args.csv).write_text(render_csv(result))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if not args.report:
        sys.stdout.write(report)
    if result.status == "deadlock":
        return EXIT_DEADLOCK
    if result.status != "ok" or global_benefit(result.accounts) < 0:
        return EXIT_FAIL
    return EXIT_OK


def cmd_diff(args) -> int:
    texts = []
    for path in (args.a, args.b):
        try:
            text = Path(path).read_text()
            decode_trace(text.splitlines())
        except (OSError, DecodeError) as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            return EXIT_INPUT
        texts.append(text)
    if texts[0] == texts[1]:
        return EXIT_OK
    a, b = texts[0].splitlines(), texts[1].splitlines()
    for n in range(max(len(a), len(b))):
        la = a[n] if n < len(a) else "<end of file>"
        lb = b[n] if n < len(b) else "<end of file>"
        if la != lb:
            print(f"first divergence at line {n + 1}")
            print(f"< {la}")
            print(f"> {lb}")
            break
    else:
        print("files differ only in line endings")
    return EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vencoord", description="Multi-tier supply network negotiation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a network configuration")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="simulate a configuration to quiescence")
    p.add_argument("config")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="mode", action="store_const", const="strict", help="halt on protocol violation")
    mode.add_argument("--lenient", dest="mode", action="store_const", const="lenient", help="drop illegal messages")
    p.set_defaults(mode=None)
    p.add_argument("--trace", help="write the message trace here")
    p.add_argument("--report", help="write the text report here (CSV accounts go next to it)")
    p.add_argument("--csv", help="write the per-VEN accounts CSV here")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("diff", help="compare two trace files byte for byte")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_diff)
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
