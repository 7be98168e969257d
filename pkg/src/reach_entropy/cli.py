"""reach-entropy command line."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import random
import sys
from pathlib import Path

import numpy as np

from .coarsening import MODES
from .coder_sim import (
    coder_from_graph,
    enumerate_symbol_sequences,
    rate_report,
    simulate,
    simulate_finite,
    trace_csv,
)
from .config import build_problem, load_config
from .entropy_graph import WEIGHT_MODES, to_dot
from .errors import ConfigError, ReachEntropyError
from .frr_check import RefinementWitness, check_frr, check_transfer_preconditions
from .oracle import exact_entropy, one_step_input, trivial_input
from .pipeline import node_label, run_pipeline, sig
from .system_model import TARGET

log = logging.getLogger("reach_entropy")


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(sig(obj), indent=2, sort_keys=True, default=repr) + "\n"


def _run(args):
    return run_pipeline(
        args.config,
        threads=args.threads,
        cache=not args.no_cache,
        coarsen_mode=args.coarsen,
        weight_mode=args.weight_mode,
    )


def cmd_abstract(args):
    report = _run(args)
    ctx = report.context
    if args.out and ctx.abstraction is not None:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["cell", "target", "box"])
        for c in ctx.abstraction.cell_order:
            if c in ctx.q_cells:
                writer.writerow([repr(c), int(c in ctx.t_cells), repr(ctx.abstraction.boxes[c])])
        Path(args.out).write_text(buf.getvalue())
    sys.stdout.write(_json(report.abstraction_stats))


def cmd_synthesize(args):
    report = _run(args)
    ctx = report.context
    if args.out:
        Path(args.out).write_text(ctx.controller.to_csv())
    stats = dict(report.controller_stats, satisfiable=report.satisfiable, uncovered=report.uncovered)
    sys.stdout.write(_json(stats))


def cmd_entropy(args):
    report = _run(args)
    _emit(_json(dict(report.entropy, **report.coarsening_stats)), args.out)


def cmd_report(args):
    report = _run(args)
    _emit(report.to_json(include_timings=args.timings), args.out)


def cmd_export_graph(args):
    report = _run(args)
    graph = report.context.graph
    if graph is None:
        text = 'digraph closed_loop {\n  rankdir=LR;\n  "T" [label="T", shape=doublecircle, style=filled, fillcolor=lightgrey];\n}\n'
    else:
        text = to_dot(graph)
    _emit(text, args.out)


def cmd_simulate(args):
    report = _run(args)
    ctx = report.context
    cfg = ctx.config
    if ctx.graph is None:
        sys.stdout.write(_json({"R_H": 0.0, "num_sequences": 1, "max_sequence_length": 1}))
        return
    fixed = ctx.problem.inputs[0] if ctx.problem.inputs else ctx.abstract.inputs[0]
    H = coder_from_graph(ctx.graph, ctx.partition, ctx.t_cells, fixed)
    q_states = set(ctx.controller.assignment) | set(ctx.t_cells)
    symbol_log = enumerate_symbol_sequences(ctx.abstract, H, q_states)
    seed = cfg.simulate.seed if args.seed is None else args.seed
    steps = cfg.simulate.steps if args.steps is None else args.steps
    x0 = cfg.simulate.x0
    if args.x0 is not None:
        x0 = " ".join(args.x0) if cfg.is_finite else [float(v) for v in args.x0]
    if x0 is not None:
        if cfg.is_finite:
            ident = {str(x): x for x in ctx.abstract.states}
            ident.update({repr(x): x for x in ctx.abstract.states})
            start = ident.get(str(x0))
            if start is None:
                raise ConfigError(f"unknown initial state {x0!r}")
            x0 = start
            rows = simulate_finite(ctx.abstract, H, x0, steps, random.Random(seed))
        else:
            rows = simulate(ctx.abstraction, H, [float(v) for v in np.atleast_1d(x0)], steps)
        _emit(trace_csv(rows, node_label), args.out)
    sys.stdout.write(_json(rate_report(symbol_log)))


def cmd_oracle(args):
    cfg = load_config(args.config)
    if not cfg.is_finite:
        raise ConfigError("the oracle runs on finite systems only")
    problem = build_problem(cfg)
    result = exact_entropy(
        problem.system,
        problem.spec,
        max_cover_size=args.max_cover_size,
        max_len=args.max_len,
        memoryless=args.memoryless,
    )
    fmt = lambda e: "T" if e is TARGET else sorted(map(repr, e))
    out = {
        "entropy": result.entropy if math.isfinite(result.entropy) else "inf",
        "trivial_input": repr(trivial_input(problem.system, problem.spec)),
        "one_step_input": repr(one_step_input(problem.system, problem.spec)),
        "witness_cover": [fmt(c) for c in result.witness_cover],
        "witness_spanning_set": [[fmt(e) for e in a] for a in result.witness_spanning_set],
        "search_bounds": result.search_bounds,
    }
    _emit(_json(out), args.out)


def read_witness(path, sys1, sys2) -> RefinementWitness:
    """CSV rows ``kind,left,right``: ``pair,x1,x2`` for the relation and ``input,u2,u1`` for r."""
    def resolver(system, attr):
        items = getattr(system, attr)
        table = {str(v): v for v in items}
        table.update({repr(v): v for v in items})
        return table

    s1, s2 = resolver(sys1, "states"), resolver(sys2, "states")
    u1, u2 = resolver(sys1, "inputs"), resolver(sys2, "inputs")
    pairs, imap = set(), {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].strip().startswith("#") or row[0] == "kind":
                continue
            if len(row) != 3:
                raise ConfigError(f"{path}:{lineno}: expected kind,left,right")
            kind, left, right = (c.strip() for c in row)
            try:
                if kind == "pair":
                    pairs.add((s1[left], s2[right]))
                elif kind == "input":
                    imap[u2[left]] = u1[right]
                else:
                    raise ConfigError(f"{path}:{lineno}: kind must be 'pair' or 'input'")
            except KeyError as exc:
                raise ConfigError(f"{path}:{lineno}: unknown identifier {exc}") from None
    return RefinementWitness(pairs, imap)


def cmd_check_frr(args):
    cfg1, cfg2 = load_config(args.system1), load_config(args.system2)
    if not (cfg1.is_finite and cfg2.is_finite):
        raise ConfigError("check-frr compares two finite systems")
    p1, p2 = build_problem(cfg1), build_problem(cfg2)
    w = read_witness(args.witness, p1.system, p2.system)
    res = check_frr(p1.system, p2.system, w)
    pre_ok, clauses = check_transfer_preconditions(w, p1.spec, p2.spec, p1.system.states)
    out = {
        "frr": res.ok,
        "counterexample": None if res.counterexample is None else [repr(v) for v in res.counterexample],
        "reason": res.reason,
        "preconditions": clauses,
        "preconditions_hold": pre_ok,
    }
    _emit(_json(out), args.out)
    return 0 if res.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reach-entropy", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def pipeline_cmd(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config")
        p.add_argument("--out", "-o")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--no-cache", action="store_true")
        p.add_argument("--coarsen", choices=MODES)
        p.add_argument("--weight-mode", choices=WEIGHT_MODES)
        p.set_defaults(func=func)
        return p

    pipeline_cmd("abstract", cmd_abstract, "build the abstraction; --out writes the cell table")
    pipeline_cmd("synthesize", cmd_synthesize, "synthesize the reach controller; --out writes it as CSV")
    pipeline_cmd("entropy", cmd_entropy, "compute N(R) on the coarse closed-loop graph")
    rep = pipeline_cmd("report", cmd_report, "full pipeline report as JSON")
    rep.add_argument("--timings", action="store_true", help="include per-stage timings (breaks byte-identity)")
    pipeline_cmd("export-graph", cmd_export_graph, "closed-loop graph in DOT format")
    sim = pipeline_cmd("simulate", cmd_simulate, "closed-loop run and symbol-rate report")
    sim.add_argument("--x0", nargs="+", default=None)
    sim.add_argument("--steps", type=int)
    sim.add_argument("--seed", type=int)

    orc = sub.add_parser("oracle", help="exact entropy of a tiny finite system")
    orc.add_argument("config")
    orc.add_argument("--out", "-o")
    orc.add_argument("--max-len", type=int)
    orc.add_argument("--max-cover-size", type=int)
    orc.add_argument("--memoryless", action="store_true")
    orc.set_defaults(func=cmd_oracle)

    frr = sub.add_parser("check-frr", help="check a feedback refinement witness between two finite systems")
    frr.add_argument("system1")
    frr.add_argument("system2")
    frr.add_argument("witness")
    frr.add_argument("--out", "-o")
    frr.set_defaults(func=cmd_check_frr)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        code = args.func(args)
    except ReachEntropyError as exc:
        where = f" [{exc.stage}]" if exc.stage else ""
        hint = f"\n  hint: {exc.hint}" if exc.hint else ""
        sys.stderr.write(f"error{where}: {exc}{hint}\n")
        return 2
    return int(code or 0)

if __name__ == "__main__":
    sys.exit(main())
