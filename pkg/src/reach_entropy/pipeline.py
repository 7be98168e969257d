"""abstraction -> synthesis -> coarsening -> closed-loop graph -> N(R)."""

from __future__ import annotations

import contextlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any

from .abstraction import build_abstraction, build_partition_abstraction
from .boxes import Box
from .coarsening import coarse_d_map, coarsen
from .coder_sim import S_EMPTY
from .config import Config, build_problem, config_hash, load_config
from .entropy_graph import build_graph, longest_path, max_path_value
from .errors import GraphCycleError, ReachEntropyError
from .synthesis import check_reachability_satisfiable, synthesize
from .system_model import TARGET

log = logging.getLogger(__name__)

HINTS = {
    "config": "check the section and key names against the example configs",
    "abstraction": "check eta_s, the state bounds, and that the target contains at least one whole cell",
    "synthesis": "enlarge the input set or the safe set",
    "coarsening": "the controller must map every non-target successor into its own domain",
    "entropy": "retry with --coarsen input-value, which always yields an acyclic graph",
}


def sig(x, digits: int = 6):
    """Round floats (recursively) to ``digits`` significant digits for reports."""
    if isinstance(x, float):
        if not math.isfinite(x):
            return x
        return float(f"{x:.{digits}g}")
    if isinstance(x, dict):
        return {k: sig(v, digits) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [sig(v, digits) for v in x]
    return x


@contextlib.contextmanager
def stage(name: str, timings: dict):
    t0 = time.perf_counter()
    try:
        yield
    except ReachEntropyError as exc:
        exc.stage = exc.stage or name
        exc.hint = exc.hint or HINTS.get(name)
        raise
    finally:
        timings[name] = time.perf_counter() - t0


def node_label(n) -> str:
    if n is TARGET:
        return "T"
    if n is S_EMPTY:
        return "s0"
    return f"g{n}"


@dataclass
class PipelineReport:
    config_hash: str
    satisfiable: bool
    uncovered: int
    abstraction_stats: dict
    controller_stats: dict
    coarsening_stats: dict
    entropy: dict
    reference: dict | None = None
    timings: dict = field(default_factory=dict)
    context: Any = field(default=None, repr=False)

    def to_dict(self, include_timings: bool = False) -> dict:
        out = {
            "config_hash": self.config_hash,
            "satisfiable": self.satisfiable,
            "uncovered": self.uncovered,
            "abstraction_stats": self.abstraction_stats,
            "controller_stats": self.controller_stats,
            "coarsening_stats": self.coarsening_stats,
            "entropy": self.entropy,
        }
        if self.reference is not None:
            out["reference"] = self.reference
        if include_timings:
            out["timings"] = self.timings
        return sig(out)

    def to_json(self, include_timings: bool = False) -> str:
        return json.dumps(self.to_dict(include_timings), indent=2, sort_keys=True) + "\n"


@dataclass
class PipelineContext:
    config: Config
    problem: Any
    abstraction: Any = None
    abstract: Any = None
    q_cells: frozenset = frozenset()
    t_cells: frozenset = frozenset()
    controller: Any = None
    partition: Any = None
    graph: Any = None


def _abstract(cfg: Config, problem, *, threads: int, cache: bool):
    if cfg.is_finite:
        system, spec = problem.system, problem.spec
        stats = {
            "q_cell_count": len(spec.safe),
            "t_cell_count": len(spec.target),
            "transition_count": system.transition_count,
        }
        return None, system, spec.safe, spec.target, stats
    if problem.cells is not None:
        abstraction = build_partition_abstraction(problem.system, problem.spec, problem.cells, problem.inputs)
    else:
        bounds = None
        if cfg.grid.bounds is not None:
            bounds = Box(cfg.grid.bounds["lower"], cfg.grid.bounds["upper"])
        abstraction = build_abstraction(
            problem.system, problem.spec, cfg.grid.eta_s, problem.inputs, bounds=bounds, threads=threads, cache=cache
        )
    return abstraction, abstraction.abstract_system, abstraction.q_cells, abstraction.t_cells, abstraction.stats()


def coarse_graph(abstract, controller, t_cells, mode: str, fallback: bool, weight_mode: str):
    """Coarsen and build the graph; on a cycle fall back to (input, value) grouping."""
    partition = coarsen(controller, mode)
    graph = build_graph(coarse_d_map(abstract, partition, t_cells), partition, weight_mode)
    try:
        max_path_value(graph)
        return partition, graph, False
    except GraphCycleError:
        if not fallback or mode != "input":
            raise
        log.warning("grouping by input gives a cyclic graph; regrouping by (input, value)")
    partition = coarsen(controller, "input-value")
    graph = build_graph(coarse_d_map(abstract, partition, t_cells), partition, weight_mode)
    return partition, graph, True


def run_pipeline(
    config,
    *,
    threads: int = 1,
    cache: bool = False,
    coarsen_mode: str | None = None,
    weight_mode: str | None = None,
) -> PipelineReport:
    timings = {}
    with stage("config", timings):
        cfg = config if isinstance(config, Config) else load_config(config)
        problem = build_problem(cfg)
    mode = coarsen_mode or cfg.entropy.coarsen
    wmode = weight_mode or cfg.entropy.weight_mode
    ctx = PipelineContext(cfg, problem)

    with stage("abstraction", timings):
        ctx.abstraction, ctx.abstract, ctx.q_cells, ctx.t_cells, a_stats = _abstract(cfg, problem, threads=threads, cache=cache)
    with stage("synthesis", timings):
        ctx.controller = synthesize(ctx.abstract, ctx.q_cells, ctx.t_cells)
        ok, missing = check_reachability_satisfiable(ctx.controller, ctx.q_cells, ctx.t_cells)
        if not ok:
            log.warning("controller leaves %d safe cells uncovered", len(missing))

    coarse_stats = {"group_count": 0, "mode_used": mode, "fallback_triggered": False}
    entropy = {
        "N_R_include_target": 0.0,
        "N_R_exclude_target": 0.0,
        "weight_mode": wmode,
        "witness_path": ["T"],
        "longest_path": 0,
        "node_count": 1,
        "edge_count": 0,
    }
    if ctx.controller.assignment:
        with stage("coarsening", timings):
            ctx.partition, ctx.graph, fell_back = coarse_graph(
                ctx.abstract, ctx.controller, ctx.t_cells, mode, cfg.entropy.fallback, wmode
            )
            coarse_stats = {
                "group_count": len(ctx.partition),
                "mode_used": ctx.partition.mode,
                "fallback_triggered": fell_back,
            }
        with stage("entropy", timings):
            include = ctx.graph.with_mode("include-target")
            exclude = ctx.graph.with_mode("exclude-target")
            best = max_path_value(ctx.graph)
            entropy.update(
                {
                    "N_R_include_target": max_path_value(include).value,
                    "N_R_exclude_target": max_path_value(exclude).value,
                    "witness_path": [node_label(n) for n in best.path],
                    "longest_path": longest_path(ctx.graph),
                    "node_count": ctx.graph.n0 + 1,
                    "edge_count": ctx.graph.edge_count,
                }
            )

    reference = None
    ref = cfg.reference
    if any(v is not None for v in (ref.domain_size, ref.group_count, ref.N_R)):
        values = {
            "domain_size": len(ctx.controller.assignment),
            "group_count": coarse_stats["group_count"],
            "N_R": entropy["N_R_include_target"],
        }
        reference = {
            k: {"reference": getattr(ref, k), "value": v, "delta": v - getattr(ref, k)}
            for k, v in values.items()
            if getattr(ref, k) is not None
        }

    report = PipelineReport(
        config_hash=config_hash(cfg),
        satisfiable=ok,
        uncovered=len(missing),
        abstraction_stats=a_stats,
        controller_stats=ctx.controller.stats(),
        coarsening_stats=coarse_stats,
        entropy=entropy,
        reference=reference,
        timings=timings,
        context=ctx,
    )
    return report
