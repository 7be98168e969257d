"""Run the three-room heating pipeline and print the report with reference deltas.

usage: python3 scripts/run_example3.py [--threads N] [--no-cache]
"""

import argparse
import sys
from pathlib import Path

from reach_entropy.pipeline import run_pipeline

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "example3.toml"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--no-cache", action="store_true")
    args = ap.parse_args(argv)

    report = run_pipeline(CONFIG, threads=args.threads, cache=not args.no_cache)
    sys.stdout.write(report.to_json(include_timings=True))
    ctx = report.context
    loops = sum(1 for c in ctx.q_cells - ctx.t_cells if all(c in s for _, s in ctx.abstract.outgoing(c)))
    print(f"non-target cells whose every input keeps a self-loop: {loops} of {len(ctx.q_cells - ctx.t_cells)}")
    for key, row in sorted((report.reference or {}).items()):
        print(f"{key:12s} value {row['value']:<10g} reference {row['reference']:<10g} delta {row['delta']:+g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
