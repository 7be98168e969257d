"""Feedback refinement relations between finite systems and entropy monotonicity."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from .coarsening import coarse_d_map, coarsen
from .entropy_graph import build_graph, max_path_value
from .errors import MalformedWitnessError, ReachEntropyError, SoundnessViolation
from .oracle import exact_entropy, verify_spanning_set
from .synthesis import check_reachability_satisfiable, synthesize
from .system_model import TARGET, FiniteSystem, ReachSpec

ORDER_TOL = 1e-9


@dataclass(frozen=True)
class RefinementWitness:
    """Relation R ⊆ X1 × X2 and input map r: U2 -> U1."""

    relation: frozenset
    input_map: Mapping

    def __post_init__(self):
        object.__setattr__(self, "relation", frozenset(self.relation))
        image, inverse = {}, {}
        for x1, x2 in self.relation:
            image.setdefault(x1, set()).add(x2)
            inverse.setdefault(x2, set()).add(x1)
        object.__setattr__(self, "_image", {k: frozenset(v) for k, v in image.items()})
        object.__setattr__(self, "_inverse", {k: frozenset(v) for k, v in inverse.items()})

    def image(self, x1) -> frozenset:
        return self._image.get(x1, frozenset())

    def image_set(self, states) -> frozenset:
        out = set()
        for x in states:
            out |= self.image(x)
        return frozenset(out)

    def preimage(self, states) -> frozenset:
        out = set()
        for x in states:
            out |= self._inverse.get(x, frozenset())
        return frozenset(out)

    @classmethod
    def identity(cls, system: FiniteSystem) -> "RefinementWitness":
        return cls({(x, x) for x in system.states}, {u: u for u in system.inputs})


@dataclass(frozen=True)
class FRRResult:
    ok: bool
    counterexample: Any = None
    reason: str = ""

    def __bool__(self):
        return self.ok


def _check_witness_ids(sys1, sys2, w: RefinementWitness) -> None:
    missing = [u for u in sys2.inputs if u not in w.input_map]
    if missing:
        raise MalformedWitnessError(f"input map is not defined on abstract inputs {missing!r}")
    bad_u = [u for u in w.input_map.values() if u not in sys1.input_set]
    if bad_u:
        raise MalformedWitnessError(f"input map targets unknown concrete inputs {bad_u!r}")
    for x1, x2 in w.relation:
        if x1 not in sys1.state_set or x2 not in sys2.state_set:
            raise MalformedWitnessError(f"relation pair {(x1, x2)!r} references unknown states")


def check_frr(sys1, sys2, w: RefinementWitness) -> FRRResult:
    """R(F1(x1, r(u))) ⊆ F2(x2, u) for all related pairs and abstract inputs, plus strictness."""
    _check_witness_ids(sys1, sys2, w)
    for x1 in sys1.states:
        if not w.image(x1):
            return FRRResult(False, (x1,), "strictness: state has no related abstract state")
    for x1, x2 in sorted(w.relation, key=repr):
        for u in sys2.inputs:
            reached = w.image_set(sys1.post(x1, w.input_map[u]))
            if not reached <= sys2.post(x2, u):
                return FRRResult(False, (x1, x2, u), "inclusion fails")
    return FRRResult(True)


def check_transfer_preconditions(w: RefinementWitness, spec1: ReachSpec, spec2: ReachSpec, states1=None) -> tuple:
    """Evaluate the four clauses; returns ``(ok, {clause: bool})``.

    ``states1`` is X1; by default the states appearing in the relation.
    """
    states1 = frozenset(states1) if states1 is not None else frozenset(x1 for x1, _ in w.relation)
    clauses = {
        "Q1 = R^-1(Q2)": spec1.safe == w.preimage(spec2.safe),
        "T1 = R^-1(T2)": spec1.target == w.preimage(spec2.target),
        "#R(x1) = 1": all(len(w.image(x)) == 1 for x in states1),
        "R^-1(x2) nonempty on Q2": all(w.preimage([x]) for x in spec2.safe),
    }
    return all(clauses.values()), clauses


def pull_back_spanning_set(R2, G2, w: RefinementWitness) -> tuple:
    """Map every element through R^-1 and every input through r: ``(R1, cover1, G1)``."""
    def back(e):
        return TARGET if e is TARGET else w.preimage(e)

    R1, G1 = [], {}
    for alpha in R2:
        alpha = tuple(alpha)
        R1.append(tuple(back(e) for e in alpha))
        for t in range(len(alpha) - 1):
            p2 = alpha[: t + 1]
            u = G2[p2] if p2 in G2 else G2[p2[-1]]
            G1[tuple(back(e) for e in p2)] = w.input_map[u]
    cover = tuple(dict.fromkeys(e for a in R1 for e in a if e is not TARGET))
    return R1, cover, G1


def pipeline_bound(system: FiniteSystem, spec: ReachSpec, mode: str = "input", weight_mode: str = "exclude-target") -> float:
    """N(R) from synthesis, coarsening and the graph maximum; inf when unsatisfiable."""
    controller = synthesize(system, spec.safe, spec.target)
    ok, _ = check_reachability_satisfiable(controller, spec.safe, spec.target)
    if not ok:
        return math.inf
    if not controller.assignment:
        return 0.0
    partition = coarsen(controller, mode)
    graph = build_graph(coarse_d_map(system, partition, spec.target), partition, weight_mode)
    try:
        return max_path_value(graph).value
    except ReachEntropyError:
        if mode == "input":
            return pipeline_bound(system, spec, "input-value", weight_mode)
        raise


def check_entropy_monotonicity(sys1, sys2, w: RefinementWitness, spec1: ReachSpec, spec2: ReachSpec, *, exact: bool = True, max_len=None) -> dict:
    """Compare h1 and h2; the ordering is asserted only when both are exact oracle values."""
    frr = check_frr(sys1, sys2, w)
    pre_ok, clauses = check_transfer_preconditions(w, spec1, spec2, sys1.states)
    report = {"frr": frr.ok, "preconditions": clauses, "kind": "exact" if exact else "upper-bound"}
    if exact:
        h1 = exact_entropy(sys1, spec1, max_len=max_len).entropy
        h2 = exact_entropy(sys2, spec2, max_len=max_len).entropy
    else:
        h1, h2 = pipeline_bound(sys1, spec1), pipeline_bound(sys2, spec2)
    report.update({"h1": h1, "h2": h2})
    if exact and frr.ok and pre_ok:
        holds = h1 <= h2 + ORDER_TOL
        report["ordering_holds"] = holds
        if not holds:
            raise SoundnessViolation(f"refinement pair violates h1 <= h2: {h1} > {h2}")
    else:
        report["ordering_holds"] = None
    return report


def sampled_concrete_system(abstraction, n_per_cell: int, rng: np.random.Generator, inputs=None) -> tuple:
    """Finite sample of the concrete system with the quantizer as relation.

    States are sampled points (n per safe cell) and their one-step images;
    only sampled points carry transitions. ``inputs`` restricts the input
    set (default: all abstraction inputs). Returns ``(system, witness)``.
    """
    inputs = tuple(abstraction.inputs if inputs is None else inputs)
    points, transitions = [], {}
    for cell in sorted(abstraction.q_cells, key=repr):
        for x in abstraction.boxes[cell].sample(rng, n_per_cell):
            points.append(tuple(float(v) for v in x))
    states = dict.fromkeys(points)
    for p in points:
        for u in inputs:
            y = tuple(float(v) for v in np.atleast_1d(abstraction.model(np.asarray(p), np.asarray(u))))
            states.setdefault(y)
            transitions[(p, u)] = {y}
    system = FiniteSystem(tuple(states), inputs, transitions)
    relation = {(x, abstraction.relation(x)) for x in system.states}
    return system, RefinementWitness(relation, {u: u for u in inputs})


def transport_check(sys1, sys2, w, spec1, spec2, R2, cover2, G2) -> dict:
    """Pull a spanning set back through a valid witness and compare N values."""
    ok2, rep2 = verify_spanning_set(sys2, spec2, cover2, G2, R2)
    if not ok2:
        raise MalformedWitnessError("; ".join(rep2["problems"]))
    R1, cover1, G1 = pull_back_spanning_set(R2, G2, w)
    ok1, rep1 = verify_spanning_set(sys1, spec1, cover1, G1, R1)
    return {"valid": ok1, "problems": rep1["problems"], "N1": rep1["N_R"], "N2": rep2["N_R"]}
