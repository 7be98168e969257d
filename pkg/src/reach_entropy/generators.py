"""Random finite systems and graphs for property checks and sweeps."""

from __future__ import annotations

import random

from .frr_check import RefinementWitness
from .system_model import TARGET, FiniteSystem, ReachSpec


def ranked_system(rng: random.Random, m: int, n_inputs: int = 3, branch: int = 3, noise: float = 0.7):
    """States 0..m with target {0}; each state has one input that strictly lowers a hidden rank,
    so reach-while-stay is always satisfiable. Other inputs are random (possibly blocking)."""
    states = list(range(m + 1))
    rank = {0: 0, **{x: rng.randint(1, m) for x in range(1, m + 1)}}
    tr = {}
    for x in range(1, m + 1):
        good = rng.randrange(n_inputs)
        for u in range(n_inputs):
            if u == good:
                lower = [y for y in states if rank[y] < rank[x]]
                tr[(x, u)] = set(rng.sample(lower, rng.randint(1, min(branch, len(lower)))))
            elif rng.random() < noise:
                tr[(x, u)] = set(rng.sample(states, rng.randint(1, min(branch, len(states)))))
    for u in range(n_inputs):
        if rng.random() < 0.5:
            tr[(0, u)] = set(rng.sample(states, 1))
    return FiniteSystem(tuple(states), tuple(range(n_inputs)), tr), ReachSpec(set(states), {0})


def random_system(rng: random.Random, m: int, n_inputs: int = 2, branch: int = 2):
    """Unstructured system on 0..m with target {0}; often unsatisfiable."""
    states = list(range(m + 1))
    tr = {}
    for x in states:
        for u in range(n_inputs):
            if rng.random() < 0.85:
                tr[(x, u)] = set(rng.sample(states, rng.randint(1, min(branch, len(states)))))
    return FiniteSystem(tuple(states), tuple(range(n_inputs)), tr), ReachSpec(set(states), {0})


def random_dag(rng: random.Random, n: int, p: float = 0.35):
    """D-map of a random acyclic graph on n nodes: edges only go to lower ids, and every
    node without a lower successor (or by chance) also points at TARGET."""
    d = {}
    for i in range(n):
        succ = {j for j in range(i) if rng.random() < p}
        if not succ or rng.random() < 0.4:
            succ.add(TARGET)
        d[i] = frozenset(succ)
    order = list(range(n))
    rng.shuffle(order)
    return {i: d[i] for i in order}


def refinement_pair(rng: random.Random, m2: int, copies: int = 2, extra_input: bool = True):
    """(sys1, spec1, sys2, spec2, witness) where sys1 splits each abstract state into 1..copies
    concrete states; concrete successors are nonempty subsets of the abstract successors' preimage."""
    sys2, spec2 = ranked_system(rng, m2)
    split = {x: [(x, k) for k in range(rng.randint(1, copies))] for x in sys2.states}
    # keep the concrete side within the oracle cap
    while sum(len(v) for x, v in split.items() if x not in spec2.target) > 8:
        x = max((x for x in split if x not in spec2.target), key=lambda x: len(split[x]))
        split[x].pop()
    states1 = [s for x in sys2.states for s in split[x]]
    inputs1 = list(sys2.inputs) + (["extra"] if extra_input else [])
    tr = {}
    for x2 in sys2.states:
        for x1 in split[x2]:
            for u in sys2.inputs:
                pre = [s for y in sys2.post(x2, u) for s in split[y]]
                if pre:
                    tr[(x1, u)] = set(rng.sample(pre, rng.randint(1, len(pre))))
            if extra_input and rng.random() < 0.5:
                tr[(x1, "extra")] = set(rng.sample(states1, rng.randint(1, 2)))
    sys1 = FiniteSystem(tuple(states1), tuple(inputs1), tr)
    spec1 = ReachSpec({s for x in spec2.safe for s in split[x]}, {s for x in spec2.target for s in split[x]})
    relation = {(s, x) for x in sys2.states for s in split[x]}
    return sys1, spec1, sys2, spec2, RefinementWitness(relation, {u: u for u in sys2.inputs})
