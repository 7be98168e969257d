"""Acceptance criteria 1-7; each test records one PASS/FAIL line."""

import math
import random
import time
from pathlib import Path

import numpy as np

from reach_entropy.abstraction import build_abstraction, build_partition_abstraction, soundness_violations
from reach_entropy.boxes import Box
from reach_entropy.coder_sim import (
    S_EMPTY,
    coder_from_graph,
    enumerate_symbol_sequences,
    spanning_set_from_traces,
    transmission_rate,
)
from reach_entropy.entropy_graph import ClosedLoopGraph, graph_spanning_set, max_path_value, spanning_set_value
from reach_entropy.frr_check import check_entropy_monotonicity, check_frr, check_transfer_preconditions, transport_check
from reach_entropy.generators import random_dag, ranked_system, refinement_pair
from reach_entropy.oracle import exact_entropy, trivial_input, verify_spanning_set
from reach_entropy.pipeline import run_pipeline
from reach_entropy.system_model import EXAMPLE2_CELLS, ContinuousSystem, ReachSpec, example1_system, example2_system

from conftest import graph_of, pipeline_pieces
from test_entropy_graph import brute_force

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SLACK = 1e-9


def test_criterion_1_example1(record):
    t0 = time.perf_counter()
    system, spec = example1_system()
    h = exact_entropy(system, spec).entropy
    report = run_pipeline(CONFIGS / "example1.toml")
    ctx = report.context
    H = coder_from_graph(ctx.graph, ctx.partition, ctx.t_cells, "a")
    log = enumerate_symbol_sequences(ctx.abstract, H, spec.safe)
    rate = transmission_rate(log)
    z_hat = {tuple(tuple(sorted(ctx.partition.groups[s])) if s is not S_EMPTY else "s0" for s in z) for z in log.z_hat}
    elapsed = time.perf_counter() - t0
    inc, exc = report.entropy["N_R_include_target"], report.entropy["N_R_exclude_target"]
    ok = (
        h == 1.0
        and inc == exc == rate == 1.0
        and z_hat == {((0,), "s0"), ((2,), "s0")}
        and elapsed < 1.0
    )
    record(1, ok, f"h={h} N_inc={inc} N_exc={exc} R(H)={rate} Z={sorted(z_hat)} time={elapsed:.3f}s")
    assert ok


def test_criterion_2_example2(record):
    t0 = time.perf_counter()
    system, spec, inputs = example2_system()
    a = build_partition_abstraction(system, spec, EXAMPLE2_CELLS, inputs)
    trivial = trivial_input(a.abstract_system, ReachSpec(a.q_cells, a.t_cells))
    report = run_pipeline(CONFIGS / "example2.toml")
    assignment = dict(report.context.controller.assignment)
    N = report.entropy["N_R_include_target"]
    elapsed = time.perf_counter() - t0
    ok = (
        trivial is None
        and report.satisfiable
        and assignment == {"A1": (0.75,), "A2": (-0.5,)}
        and N == 1.0
        and elapsed < 1.0
    )
    record(2, ok, f"trivial_input={trivial} satisfiable={report.satisfiable} C={assignment} N={N} time={elapsed:.3f}s")
    assert ok


def test_criterion_3_example3(record, room_report):
    r = room_report
    domain = r.controller_stats["domain_size"]
    groups = r.coarsening_stats["group_count"]
    N = r.entropy["N_R_include_target"]
    runtime = sum(r.timings.values())
    ref = r.reference
    ok = (
        math.isfinite(N)
        and 150 <= domain <= 300
        and 40 <= groups <= 120
        and 4.0 <= N <= 9.0
        and runtime < 300
    )
    deltas = ", ".join(f"{k} {v['value']:g} (ref {v['reference']:g}, delta {v['delta']:+g})" for k, v in sorted(ref.items()))
    record(3, ok, f"{deltas}; satisfiable={r.satisfiable} uncovered={r.uncovered} runtime={runtime:.1f}s")
    assert ok


def test_criterion_4_rate_bounds(record):
    rng = random.Random(2024)
    counts = {"systems": 0, "a": 0, "b": 0, "c": 0}
    worst = {"a": -math.inf, "b": -math.inf, "c": -math.inf}
    while counts["systems"] < 200:
        m = rng.randint(1, 8)
        system, spec = ranked_system(rng, m, n_inputs=rng.randint(1, 3), branch=rng.randint(1, 3))
        graph, partition, _ = pipeline_pieces(system, spec)
        if graph is None:
            continue
        counts["systems"] += 1
        R, cover, G, _ = graph_spanning_set(graph, partition)
        N = spanning_set_value(R, "exclude-target")
        H = coder_from_graph(graph, partition, spec.target, system.inputs[0])
        log = enumerate_symbol_sequences(system, H, spec.safe)
        rate = transmission_rate(log)
        R2, cover2, G2 = spanning_set_from_traces(log, H)
        ok2, rep2 = verify_spanning_set(system, spec, cover2, G2, R2)
        n_traces = rep2["N_R"] if ok2 else math.inf
        h = exact_entropy(system, spec).entropy
        for key, gap in (("a", rate - N), ("b", n_traces - rate), ("c", h - N)):
            worst[key] = max(worst[key], gap)
            counts[key] += gap > SLACK
    ok = counts["a"] == counts["b"] == counts["c"] == 0
    record(
        4,
        ok,
        f"{counts['systems']} systems; violations (a) {counts['a']} (b) {counts['b']} (c) {counts['c']}; "
        f"worst gaps {worst['a']:.3g} {worst['b']:.3g} {worst['c']:.3g}",
    )
    assert ok


def test_criterion_5_dp_exact(record):
    rng = random.Random(5)
    worst, n = 0.0, 0
    for _ in range(500):
        d = random_dag(rng, rng.randint(1, 12))
        for mode in ("include-target", "exclude-target"):
            g = graph_of(d, mode)
            worst = max(worst, abs(max_path_value(g).value - brute_force(g.successors, g.weights, g.n0)))
            n += 1
        weights = {v: rng.uniform(0, 6) for v in g.nodes}
        g = ClosedLoopGraph(g.nodes, g.successors, weights, "custom")
        worst = max(worst, abs(max_path_value(g).value - brute_force(g.successors, weights, g.n0)))
        n += 1
    ok = worst <= 1e-12
    record(5, ok, f"{n} graphs from 500 random DAGs (<= 12 nodes); max |DP - enumeration| = {worst:.3g}")
    assert ok


def test_criterion_6_refinement(record, room_report):
    rng = random.Random(6)
    pairs, transport_bad, order_bad = 0, 0, 0
    while pairs < 100:
        sys1, spec1, sys2, spec2, w = refinement_pair(rng, rng.randint(1, 5))
        if not (check_frr(sys1, sys2, w).ok and check_transfer_preconditions(w, spec1, spec2, sys1.states)[0]):
            continue
        pairs += 1
        res = exact_entropy(sys2, spec2)
        rep = transport_check(sys1, sys2, w, spec1, spec2, res.witness_spanning_set, res.witness_cover, res.witness_inputs)
        graph, partition, _ = pipeline_pieces(sys2, spec2)
        R, cover, G, _ = graph_spanning_set(graph, partition)
        rep2 = transport_check(sys1, sys2, w, spec1, spec2, R, cover, G)
        transport_bad += not (rep["valid"] and rep["N1"] == rep["N2"] and rep2["valid"] and rep2["N1"] == rep2["N2"])
        order_bad += check_entropy_monotonicity(sys1, sys2, w, spec1, spec2)["ordering_holds"] is not True

    scalar = ContinuousSystem("scalar_linear", {"a": 0.5, "b": 1.0}, (Box([0.0], [6.0]),))
    scalar_spec = ReachSpec((Box([0.0], [6.0]),), (Box([0.0], [2.0]),))
    scalar_abs = build_abstraction(scalar, scalar_spec, 0.25, [(u,) for u in np.linspace(-1, 1, 9)])
    system, spec, inputs = example2_system()
    ex2_abs = build_partition_abstraction(system, spec, EXAMPLE2_CELLS, inputs)
    room_abs = room_report.context.abstraction
    sampled = {
        "scalar grid": len(soundness_violations(scalar_abs, 10_000, np.random.default_rng(0))),
        "scalar cells": len(soundness_violations(ex2_abs, 10_000, np.random.default_rng(1))),
        "room": len(soundness_violations(room_abs, 10_000, np.random.default_rng(2))),
    }
    ok = transport_bad == 0 and order_bad == 0 and not any(sampled.values())
    record(
        6,
        ok,
        f"{pairs} pairs; transport failures {transport_bad}; h1 > h2 on {order_bad}; "
        f"sampling violations (10^4 each) {sampled}",
    )
    assert ok


def test_criterion_7_mode_order(record, room_report):
    graphs = []
    for name in ("example1", "example2"):
        graphs.append(run_pipeline(CONFIGS / f"{name}.toml").context.graph)
    if room_report.context.graph is not None:
        graphs.append(room_report.context.graph)
    rng = random.Random(7)
    for _ in range(200):
        system, spec = ranked_system(rng, rng.randint(1, 8))
        graph, _, _ = pipeline_pieces(system, spec, weight_mode="include-target")
        if graph is not None:
            graphs.append(graph)
    for _ in range(500):
        graphs.append(graph_of(random_dag(rng, rng.randint(1, 12))))
    bad = 0
    for g in graphs:
        inc = max_path_value(g.with_mode("include-target")).value
        exc = max_path_value(g.with_mode("exclude-target")).value
        bad += exc > inc + SLACK
    ok = bad == 0
    record(7, ok, f"{len(graphs)} graphs; exclude > include on {bad}")
    assert ok
