"""Coder-controllers built from spanning sets, closed-loop symbol enumeration, and R(H).

Symbols are cover elements (or partition group ids for graph-backed
controllers); :data:`S_EMPTY` is sent once the state is in the target. The
coder picks, among the successors allowed after the current symbol prefix,
an element containing the state; the controller applies the input that G
assigns to the extended prefix.
"""

from __future__ import annotations

import csv
import io
import math
import random
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .errors import MalformedWitnessError, NonTerminationError, SoundnessViolation
from .system_model import TARGET, FiniteSystem


class _Empty:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "s0"

    def __reduce__(self):
        return (_Empty, ())


S_EMPTY = _Empty()


@dataclass
class CoderController:
    """Coder/controller pair over a symbol alphabet.

    ``successors(prefix)`` lists the non-target symbols allowed after a
    symbol prefix (the empty prefix gives the first symbols), in tie-break
    order; ``members(symbol)`` is the state set of a symbol; ``input_for``
    maps a nonempty prefix to the input applied after it was sent.
    """

    symbols: tuple
    successors: Callable
    members: Callable
    input_for: Callable
    target: frozenset
    fixed_input: Any
    seed: int | None = None
    _choices: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._rng = random.Random(self.seed) if self.seed is not None else None

    def encode(self, prefix: tuple, x):
        """Next symbol for state ``x`` after ``prefix``; S_EMPTY inside the target."""
        if (prefix and prefix[-1] is S_EMPTY) or x in self.target:
            return S_EMPTY
        key = (prefix, x)
        if key in self._choices:
            return self._choices[key]
        options = [s for s in self.successors(prefix) if x in self.members(s)]
        if not options:
            raise SoundnessViolation(f"state {x!r} after symbols {prefix!r} lies in no allowed element")
        pick = options[0] if self._rng is None else self._rng.choice(options)
        self._choices[key] = pick
        return pick

    def control(self, prefix: tuple):
        if not prefix or prefix[-1] is S_EMPTY:
            return self.fixed_input
        return self.input_for(prefix)


def _lookup(G, prefix):
    if callable(G):
        return G(prefix)
    if prefix in G:
        return G[prefix]
    return G[prefix[-1]]


def build_coder_controller(R, cover, G, target, fixed_input, seed: int | None = None) -> CoderController:
    """Controller whose symbol prefixes are the non-target prefixes of R."""
    cover = tuple(dict.fromkeys(frozenset(c) for c in cover))
    rank = {c: i for i, c in enumerate(cover)}
    children = defaultdict(set)
    for alpha in R:
        alpha = tuple(TARGET if e is TARGET else frozenset(e) for e in alpha)
        for t in range(len(alpha)):
            if alpha[t] is TARGET:
                break
            if alpha[t] not in rank:
                raise MalformedWitnessError(f"sequence element {set(alpha[t])!r} is not a cover element")
            children[alpha[:t]].add(alpha[t])
    table = {p: tuple(sorted(s, key=rank.__getitem__)) for p, s in children.items()}
    return CoderController(
        symbols=cover,
        successors=lambda p: table.get(p, ()),
        members=lambda s: s,
        input_for=lambda p: _lookup(G, p),
        target=frozenset(target),
        fixed_input=fixed_input,
        seed=seed,
    )


def coder_from_graph(graph, partition, t_cells, fixed_input, seed: int | None = None) -> CoderController:
    """Memoryless controller over group ids: successors follow the closed-loop graph."""
    first = tuple(graph.nodes)
    rank = {n: i for i, n in enumerate(graph.nodes)}
    nexts = {n: tuple(sorted((m for m in graph.successors[n] if m is not TARGET), key=rank.__getitem__)) for n in graph.nodes}
    return CoderController(
        symbols=first,
        successors=lambda p: nexts[p[-1]] if p else first,
        members=lambda g: partition.groups[g],
        input_for=lambda p: partition.group_input[p[-1]],
        target=frozenset(t_cells),
        fixed_input=fixed_input,
        seed=seed,
    )


@dataclass(frozen=True)
class SymbolLog:
    z_hat: frozenset
    prefix_successors: Mapping
    prefix_states: Mapping

    @property
    def max_sequence_length(self) -> int:
        return max((len(z) for z in self.z_hat), default=0)


def _prefix_table(z_hat) -> dict:
    table = defaultdict(set)
    for z in z_hat:
        for t in range(len(z)):
            if z[t] is S_EMPTY:
                break
            table[z[:t]].add(z[t])
    return dict(table)


def enumerate_symbol_sequences(system: FiniteSystem, H: CoderController, q_states, max_steps: int | None = None) -> SymbolLog:
    """All terminated symbol sequences of the closed loop from ``q_states``.

    Raises SoundnessViolation if a branch leaves ``q_states`` or blocks, and
    NonTerminationError if some branch is still running after ``max_steps``.
    """
    q_states = frozenset(q_states)
    if max_steps is None:
        max_steps = len(q_states) + 1
    z_hat, prefix_states = set(), defaultdict(set)
    seen = set()
    queue = deque()
    for x in sorted(q_states, key=repr):
        s = H.encode((), x)
        if s is S_EMPTY:
            z_hat.add((S_EMPTY,))
            continue
        queue.append((x, (s,)))
    while queue:
        x, prefix = queue.popleft()
        if (x, prefix) in seen:
            continue
        seen.add((x, prefix))
        prefix_states[prefix].add(x)
        if len(prefix) > max_steps:
            raise NonTerminationError(f"symbol prefix {prefix!r} exceeds {max_steps} steps without reaching the target")
        u = H.control(prefix)
        succ = system.post(x, u)
        if not succ:
            raise SoundnessViolation(f"state {x!r} blocks under {u!r}")
        for y in sorted(succ, key=repr):
            if y not in q_states:
                raise SoundnessViolation(f"state {y!r} reached from {x!r} under {u!r} leaves the safe set")
            s = H.encode(prefix, y)
            if s is S_EMPTY:
                z_hat.add(prefix + (S_EMPTY,))
            else:
                queue.append((y, prefix + (s,)))
    if len(z_hat) > 1:
        z_hat.discard((S_EMPTY,))
    z_hat = frozenset(z_hat)
    return SymbolLog(z_hat, _prefix_table(z_hat), {p: frozenset(s) for p, s in prefix_states.items()})


def transmission_rate(log: SymbolLog) -> float:
    """max over sequences of length > 1 of the mean log2 branching along the sequence."""
    table = log.prefix_successors
    best = 0.0
    for z in log.z_hat:
        tau = len(z)
        if tau <= 1:
            continue
        total = sum(math.log2(len(table[z[:t]])) for t in range(tau - 1))
        best = max(best, total / (tau - 1))
    return best


def spanning_set_from_traces(log: SymbolLog, H: CoderController) -> tuple:
    """Reach-spanning set rebuilt from the states seen after each symbol prefix.

    Returns ``(R, cover, G)`` with G keyed by cover-sequence prefix.
    """
    R, G = [], {}
    for z in sorted(log.z_hat, key=repr):
        body = z[:-1]
        alpha = tuple(log.prefix_states[body[: j + 1]] for j in range(len(body)))
        R.append(alpha + (TARGET,))
        for j in range(len(body)):
            key = alpha[: j + 1]
            u = H.control(body[: j + 1])
            if G.setdefault(key, u) != u:
                raise MalformedWitnessError(f"two symbol prefixes share state sets {key!r} but use different inputs")
    if (TARGET,) not in R:
        R.append((TARGET,))
    cover = tuple(dict.fromkeys(e for a in R for e in a if e is not TARGET))
    return R, cover, G


@dataclass(frozen=True)
class TraceRow:
    step: int
    state: tuple
    cell: Any
    symbol: Any
    input: Any


def simulate(abstraction, H: CoderController, x0, steps: int) -> list:
    """Run the loop on the concrete model; the coder sees the cell of each state.

    Stops once the target is reached. Raises SoundnessViolation when a state
    leaves the safe cells.
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    cell = abstraction.relation(x)
    rows, prefix = [], ()
    for k in range(steps + 1):
        if cell not in abstraction.q_cells:
            raise SoundnessViolation(f"state {x.tolist()} at step {k} left the safe set")
        sym = H.encode(prefix, cell)
        prefix = prefix + (sym,)
        u = H.control(prefix)
        rows.append(TraceRow(k, tuple(float(v) for v in x), cell, sym, u))
        if sym is S_EMPTY:
            break
        x = np.atleast_1d(abstraction.model(x, np.asarray(u, dtype=float)))
        cell = abstraction.relation(x)
    return rows


def simulate_finite(system: FiniteSystem, H: CoderController, x0, steps: int, rng: random.Random) -> list:
    """One closed-loop run on a finite system; nondeterminism is resolved by ``rng``."""
    rows, prefix, x = [], (), x0
    for k in range(steps + 1):
        sym = H.encode(prefix, x)
        prefix = prefix + (sym,)
        u = H.control(prefix)
        rows.append(TraceRow(k, (x,), x, sym, u))
        if sym is S_EMPTY:
            break
        succ = sorted(system.post(x, u), key=repr)
        if not succ:
            raise SoundnessViolation(f"state {x!r} blocks under {u!r}")
        x = rng.choice(succ)
    return rows


def trace_csv(rows, symbol_label=repr) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    dim = len(rows[0].state) if rows else 0
    writer.writerow(["step"] + [f"x{i}" for i in range(dim)] + ["cell", "symbol", "input"])
    for r in rows:
        writer.writerow([r.step, *r.state, repr(r.cell), symbol_label(r.symbol), repr(r.input)])
    return buf.getvalue()


def rate_report(log: SymbolLog) -> dict:
    return {
        "R_H": transmission_rate(log),
        "num_sequences": len(log.z_hat),
        "max_sequence_length": log.max_sequence_length,
    }
