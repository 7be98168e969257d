import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reach_entropy.coder_sim import (
    S_EMPTY,
    build_coder_controller,
    coder_from_graph,
    enumerate_symbol_sequences,
    rate_report,
    simulate,
    simulate_finite,
    spanning_set_from_traces,
    trace_csv,
    transmission_rate,
)
from reach_entropy.entropy_graph import graph_spanning_set, max_path_value, spanning_set_value
from reach_entropy.errors import NonTerminationError, SoundnessViolation
from reach_entropy.generators import ranked_system
from reach_entropy.oracle import exact_entropy, verify_spanning_set
from reach_entropy.pipeline import run_pipeline
from reach_entropy.system_model import TARGET, FiniteSystem, example1_system

from conftest import pipeline_pieces

EXAMPLE2 = Path(__file__).resolve().parents[1] / "configs" / "example2.toml"

A1, A2 = frozenset({0}), frozenset({2})


def example1_coder(seed=None):
    system, spec = example1_system()
    R = [(A1, TARGET), (A2, TARGET), (TARGET,)]
    return system, spec, build_coder_controller(R, [A1, A2], {A1: "a", A2: "b"}, spec.target, "a", seed)


def test_example1_symbols_and_rate():
    system, spec, H = example1_coder()
    log = enumerate_symbol_sequences(system, H, spec.safe)
    assert log.z_hat == {(A1, S_EMPTY), (A2, S_EMPTY)}
    assert transmission_rate(log) == 1.0
    assert rate_report(log) == {"R_H": 1.0, "num_sequences": 2, "max_sequence_length": 2}


def test_example1_traces_rebuild_a_spanning_set():
    system, spec, H = example1_coder()
    R, cover, G = spanning_set_from_traces(enumerate_symbol_sequences(system, H, spec.safe), H)
    ok, rep = verify_spanning_set(system, spec, cover, G, R)
    assert ok and rep["N_R"] == 1.0


def test_example1_from_oracle_witness():
    system, spec = example1_system()
    res = exact_entropy(system, spec)
    H = build_coder_controller(res.witness_spanning_set, res.witness_cover, res.witness_inputs, spec.target, "a")
    assert transmission_rate(enumerate_symbol_sequences(system, H, spec.safe)) == 1.0


def test_example2_closed_loop():
    ctx = run_pipeline(EXAMPLE2).context
    H = coder_from_graph(ctx.graph, ctx.partition, ctx.t_cells, (0.75,))
    log = enumerate_symbol_sequences(ctx.abstract, H, set(ctx.controller.assignment) | set(ctx.t_cells))
    g = {next(iter(cells)): i for i, cells in enumerate(ctx.partition.groups)}
    assert log.z_hat == {(g["A2"], S_EMPTY), (g["A1"], g["A2"], S_EMPTY)}
    assert transmission_rate(log) == 1.0
    # 5.9 -> 0.5 * 5.9 + 0.75 = 3.7 -> 0.5 * 3.7 - 0.5 = 1.35
    rows = simulate(ctx.abstraction, H, [5.9], 10)
    assert [r.cell for r in rows] == ["A1", "A2", "T"]
    assert rows[1].state == pytest.approx((3.7,))
    assert rows[2].state == pytest.approx((1.35,))
    assert rows[-1].symbol is S_EMPTY
    assert trace_csv(rows).splitlines()[0] == "step,x0,cell,symbol,input"


def test_simulate_finite_example1():
    system, spec, H = example1_coder()
    rows = simulate_finite(system, H, 2, 5, random.Random(0))
    assert [(r.state[0], r.input) for r in rows] == [(2, "b"), (1, "a")]
    assert rows[-1].symbol is S_EMPTY


def test_leaving_the_safe_set_is_caught():
    system, spec = example1_system()
    R = [(A1, TARGET), (A2, TARGET), (TARGET,)]
    H = build_coder_controller(R, [A1, A2], {A1: "b", A2: "b"}, spec.target, "a")
    with pytest.raises(SoundnessViolation):
        enumerate_symbol_sequences(system, H, spec.safe)


def test_looping_controller_is_caught():
    s = FiniteSystem((0, 1, 2), ("a",), {(1, "a"): {2}, (2, "a"): {1}})
    e1, e2 = frozenset({1}), frozenset({2})
    R = [(e1, e2, e1, e2, TARGET), (e2, e1, e2, TARGET), (TARGET,)]
    H = build_coder_controller(R, [e1, e2], {e1: "a", e2: "a"}, {0}, "a")
    with pytest.raises((NonTerminationError, SoundnessViolation)):
        enumerate_symbol_sequences(s, H, {0, 1, 2}, max_steps=6)


def test_seeded_tie_break_is_reproducible():
    # overlapping cover: state 1 lies in both elements
    s = FiniteSystem((0, 1, 2), ("a",), {(1, "a"): {0}, (2, "a"): {0}})
    e1, e2 = frozenset({1, 2}), frozenset({1})
    R = [(e1, TARGET), (e2, TARGET), (TARGET,)]
    logs = []
    for seed in (3, 3):
        H = build_coder_controller(R, [e1, e2], {e1: "a", e2: "a"}, {0}, "a", seed=seed)
        logs.append(enumerate_symbol_sequences(s, H, {0, 1, 2}).z_hat)
    assert logs[0] == logs[1]
    H = build_coder_controller(R, [e1, e2], {e1: "a", e2: "a"}, {0}, "a")
    assert enumerate_symbol_sequences(s, H, {0, 1, 2}).z_hat == {(e1, S_EMPTY)}


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.sampled_from([None, 0, 1]))
def test_rate_between_trace_bound_and_pipeline_bound(seed, m, coder_seed):
    system, spec = ranked_system(random.Random(seed), m)
    graph, partition, controller = pipeline_pieces(system, spec)
    if graph is None:
        return
    R, cover, G, _ = graph_spanning_set(graph, partition)
    N = spanning_set_value(R, "exclude-target")
    assert abs(N - max_path_value(graph.with_mode("exclude-target")).value) <= 1e-12
    H = coder_from_graph(graph, partition, spec.target, system.inputs[0], seed=coder_seed)
    log = enumerate_symbol_sequences(system, H, spec.safe)
    rate = transmission_rate(log)
    assert rate <= N + 1e-9
    R2, cover2, G2 = spanning_set_from_traces(log, H)
    ok, rep = verify_spanning_set(system, spec, cover2, G2, R2)
    assert ok, rep["problems"]
    assert rep["N_R"] <= rate + 1e-9
