"""Run every bundled case, print the tap-plant view and the report, and
optionally refreeze the golden traces.

    python3 scripts/run_cases.py [--out DIR] [--update-goldens]
"""

import argparse
from pathlib import Path

from vencoord.audit import audit_trace
from vencoord.cli import render_report
from vencoord.config import FIXTURES, load_fixture
from vencoord.simulator import export_trace, kind_label, run_to_quiescence, view_of

CASES = ["case1", "case2", "case3", "case3b", "case4"]
GOLDEN = FIXTURES / "golden"


def summarize(m) -> str:
    p = m.payload
    body = getattr(p, "lines", None) or getattr(p, "needs", None) or getattr(p, "shortfall", None)
    if body:
        return ", ".join(f"({l.product},{l.due},{l.qty})" for l in body)
    scen = getattr(p, "scenarios", None) or ([p.scenario] if getattr(p, "scenario", None) else [])
    return " | ".join(", ".join(f"({l.due},{l.qty})" for l in s.lines) for s in scen)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs")
    ap.add_argument("--update-goldens", action="store_true")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in CASES:
        cfg = load_fixture(name)
        result = run_to_quiescence(cfg.network, cfg.orders)
        text = export_trace(result.trace)
        (out / f"{name}.trace").write_text(text)
        (out / f"{name}.txt").write_text(render_report(result))
        if args.update_goldens:
            GOLDEN.mkdir(exist_ok=True)
            (GOLDEN / f"{name}.trace").write_text(text)
        audit = audit_trace(result.trace, cfg.network)
        print(f"== {name}: {result.status}, benefit {result.benefit} (audit {audit.benefit})")
        for m in view_of(result.trace, "tap"):
            print(f"  {m.seq:3d} {m.sender:>12} -> {m.to:<12} {kind_label(m):<10} {summarize(m)}")


if __name__ == "__main__":
    main()
