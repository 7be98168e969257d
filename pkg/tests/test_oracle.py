import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reach_entropy.abstraction import build_partition_abstraction
from reach_entropy.errors import MalformedWitnessError, OracleCapError
from reach_entropy.generators import random_system, ranked_system
from reach_entropy.oracle import (
    OracleResult,
    check_witness,
    exact_entropy,
    one_step_input,
    trivial_input,
    verify_spanning_set,
)
from reach_entropy.synthesis import check_reachability_satisfiable, synthesize
from reach_entropy.system_model import EXAMPLE2_CELLS, TARGET, FiniteSystem, ReachSpec, example1_system, example2_system


def example2_finite():
    system, spec, inputs = example2_system()
    a = build_partition_abstraction(system, spec, EXAMPLE2_CELLS, inputs)
    return a.abstract_system, ReachSpec(a.q_cells, a.t_cells)


def test_example1_entropy_is_one():
    system, spec = example1_system()
    res = exact_entropy(system, spec)
    assert res.entropy == 1.0
    assert set(res.witness_cover) == {frozenset({0}), frozenset({2})}
    check_witness(system, spec, res)


def test_three_private_inputs_give_log2_3():
    # every state blocks under the other states' inputs, so the cover is three singletons
    s = FiniteSystem((0, 1, 2, 3), ("a", "b", "c"), {(1, "a"): {0}, (2, "b"): {0}, (3, "c"): {0}})
    res = exact_entropy(s, ReachSpec({0, 1, 2, 3}, {0}))
    assert res.entropy == pytest.approx(math.log2(3), abs=1e-12)


def test_example2_abstraction_entropy_is_one():
    system, spec = example2_finite()
    assert trivial_input(system, spec) is None
    assert one_step_input(system, spec) is None
    res = exact_entropy(system, spec)
    assert res.entropy == 1.0
    check_witness(system, spec, res)


def test_single_input_in_finite_time_gives_zero():
    # a: 1 -> 0, 2 -> 1; b: 2 -> 0, 1 -> 2
    s = FiniteSystem((0, 1, 2), ("a", "b"), {(1, "a"): {0}, (2, "a"): {1}, (2, "b"): {0}, (1, "b"): {2}})
    spec = ReachSpec({0, 1, 2}, {0})
    assert trivial_input(s, spec) == "a"
    assert one_step_input(s, spec) is None
    assert exact_entropy(s, spec).entropy == 0.0


def test_one_step_input():
    s = FiniteSystem((0, 1, 2), ("a", "b"), {(1, "b"): {0}, (2, "b"): {0}})
    spec = ReachSpec({0, 1, 2}, {0})
    assert one_step_input(s, spec) == "b"
    assert exact_entropy(s, spec).entropy == 0.0


def test_unsatisfiable_is_infinite():
    s = FiniteSystem((0, 1, 2), ("a",), {(1, "a"): {2}, (2, "a"): {1}})
    res = exact_entropy(s, ReachSpec({0, 1, 2}, {0}))
    assert not res.satisfiable and res.entropy == math.inf
    check_witness(s, ReachSpec({0, 1, 2}, {0}), res)


def test_cap():
    n = 10
    s = FiniteSystem(tuple(range(n)), ("a",), {(x, "a"): {0} for x in range(1, n)})
    with pytest.raises(OracleCapError):
        exact_entropy(s, ReachSpec(set(range(n)), {0}))


def test_verify_hand_witness():
    system, spec = example1_system()
    A1, A2 = frozenset({0}), frozenset({2})
    R = [(A1, TARGET), (A2, TARGET), (TARGET,)]
    ok, rep = verify_spanning_set(system, spec, [A1, A2], {A1: "a", A2: "b"}, R)
    assert ok and rep["N_R"] == 1.0
    ok, rep = verify_spanning_set(system, spec, [A1, A2], {A1: "b", A2: "b"}, R)
    assert not ok and any("not covered" in p for p in rep["problems"])
    ok, rep = verify_spanning_set(system, spec, [A1], {A1: "a"}, [(A1, TARGET), (TARGET,)])
    assert not ok and any("miss" in p for p in rep["problems"])


def test_blocking_only_fails_when_required():
    system, spec = example1_system()
    both = frozenset({0, 2})
    R = [(both, TARGET), (TARGET,)]
    assert verify_spanning_set(system, spec, [both], {both: "a"}, R, require_nonblocking=False)[0] is False
    s = FiniteSystem((0, 1, 2), ("a",), {(1, "a"): {0}})
    spec2 = ReachSpec({0, 1, 2}, {0})
    elem = frozenset({1, 2})
    R = [(elem, TARGET), (TARGET,)]
    assert verify_spanning_set(s, spec2, [elem], {elem: "a"}, R)[0] is True
    assert verify_spanning_set(s, spec2, [elem], {elem: "a"}, R, require_nonblocking=True)[0] is False


def test_check_witness_rejects_tampering():
    system, spec = example1_system()
    res = exact_entropy(system, spec)
    bad = OracleResult(0.5, res.witness_cover, res.witness_spanning_set, res.witness_inputs, res.search_bounds)
    with pytest.raises(MalformedWitnessError):
        check_witness(system, spec, bad)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_witness_is_valid_and_exact(seed, m):
    system, spec = random_system(random.Random(seed), m, n_inputs=3, branch=3)
    res = exact_entropy(system, spec)
    check_witness(system, spec, res)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_history_never_worse_than_memoryless(seed, m):
    system, spec = ranked_system(random.Random(seed), m)
    h = exact_entropy(system, spec).entropy
    g = exact_entropy(system, spec, memoryless=True).entropy
    assert h <= g + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_longer_horizon_never_hurts(seed, m):
    system, spec = ranked_system(random.Random(seed), m)
    values = [exact_entropy(system, spec, max_len=L).entropy for L in range(2, m + 3)]
    for a, b in zip(values, values[1:]):
        assert b <= a + 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_satisfiable_iff_synthesis_wins(seed, m):
    system, spec = random_system(random.Random(seed), m, n_inputs=2, branch=2)
    c = synthesize(system, spec.safe, spec.target)
    ok, _ = check_reachability_satisfiable(c, spec.safe, spec.target)
    assert exact_entropy(system, spec).satisfiable == ok


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_trivial_input_means_zero(seed, m):
    system, spec = ranked_system(random.Random(seed), m)
    res = exact_entropy(system, spec)
    if trivial_input(system, spec) is not None:
        assert res.entropy == 0.0
    assert 0.0 <= res.entropy <= math.log2(m) + 1e-9
