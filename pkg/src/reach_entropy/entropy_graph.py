"""Weighted closed-loop graph and the exact maximum of the path bit-rate.

A path alpha = (A_0, ..., A_{tau-2}, T) over the partition scores

    B(alpha) = (w(A_0) + ... + w(A_{tau-3}) + log2 N0) / (tau - 1)

where N0 is the number of partition elements and w(A) = log2 of the number of
successors of A (with or without the target node). The objective is a ratio,
so plain longest-path relaxation does not apply; instead a table indexed by
path length holds the largest weight sum of each length, and the ratio is
maximised over lengths afterwards.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import GraphCycleError, MalformedControllerError
from .system_model import TARGET

WEIGHT_MODES = ("include-target", "exclude-target")
TIE_TOL = 1e-9


def node_weight(successors: frozenset, mode: str) -> float:
    if mode == "include-target":
        return math.log2(len(successors))
    if mode == "exclude-target":
        k = len(successors - {TARGET})
        return math.log2(k) if k else 0.0
    raise ValueError(f"unknown weight mode {mode!r}; choose from {WEIGHT_MODES}")


@dataclass(frozen=True)
class ClosedLoopGraph:
    nodes: tuple
    successors: Mapping
    weights: Mapping
    weight_mode: str

    @property
    def n0(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return sum(len(s) for s in self.successors.values())

    def with_mode(self, weight_mode: str) -> "ClosedLoopGraph":
        return build_graph(self.successors, weight_mode=weight_mode, order=self.nodes)


def build_graph(d_map: Mapping, partition=None, weight_mode: str = "include-target", order=None) -> ClosedLoopGraph:
    """Graph on the non-target nodes of ``d_map`` plus TARGET.

    ``partition`` is accepted for symmetry with the pipeline and only used to
    check that every group has a D entry.
    """
    nodes = tuple(order) if order is not None else tuple(d_map)
    if partition is not None and len(partition.groups) != len(nodes):
        raise MalformedControllerError("D-map does not cover every partition element")
    succ, weights = {}, {}
    for n in nodes:
        s = frozenset(d_map[n])
        if not s:
            raise MalformedControllerError(f"node {n!r} has no successors")
        unknown = s - set(nodes) - {TARGET}
        if unknown:
            raise MalformedControllerError(f"node {n!r} points at unknown nodes {sorted(map(repr, unknown))}")
        succ[n] = s
        weights[n] = node_weight(s, weight_mode)
    return ClosedLoopGraph(nodes, succ, weights, weight_mode)


def check_acyclic(graph: ClosedLoopGraph) -> list:
    """Topological order of the non-target nodes; raises GraphCycleError with a witness cycle."""
    WHITE, GREY, BLACK = 0, 1, 2
    colour = {n: WHITE for n in graph.nodes}
    post_order = []
    for root in graph.nodes:
        if colour[root] != WHITE:
            continue
        stack = [(root, iter(sorted_succ(graph, root)))]
        colour[root] = GREY
        path = [root]
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                path.pop()
                colour[node] = BLACK
                post_order.append(node)
                continue
            if colour[nxt] == GREY:
                raise GraphCycleError(path[path.index(nxt):])
            if colour[nxt] == WHITE:
                colour[nxt] = GREY
                path.append(nxt)
                stack.append((nxt, iter(sorted_succ(graph, nxt))))
    return post_order[::-1]


def sorted_succ(graph: ClosedLoopGraph, node) -> list:
    """Non-target successors in node order."""
    rank = _rank(graph)
    return sorted((m for m in graph.successors[node] if m is not TARGET), key=rank.__getitem__)


def _rank(graph):
    return {n: i for i, n in enumerate(graph.nodes)}


@dataclass(frozen=True)
class PathValue:
    path: tuple
    edge_count: int
    weight_sum: float
    value: float


def path_value(graph: ClosedLoopGraph, path) -> PathValue:
    """Score one node sequence ending at TARGET; checks that every edge exists."""
    path = tuple(path)
    if not path or path[-1] is not TARGET or TARGET in path[:-1]:
        raise ValueError("a path must end with (and only with) TARGET")
    for a, b in zip(path, path[1:]):
        if b not in graph.successors[a]:
            raise ValueError(f"no edge {a!r} -> {b!r}")
    if len(path) == 1:
        return PathValue(path, 0, 0.0, 0.0)
    edges = len(path) - 1
    wsum = sum(graph.weights[n] for n in path[:-2])
    return PathValue(path, edges, wsum, (wsum + math.log2(graph.n0)) / edges)


def _length_table(graph: ClosedLoopGraph):
    order = check_acyclic(graph)
    V = graph.n0
    best = {}
    for n in reversed(order):
        row = np.full(V + 1, -np.inf)
        if TARGET in graph.successors[n]:
            row[1] = 0.0
        for m in graph.successors[n]:
            if m is TARGET:
                continue
            row[2:] = np.maximum(row[2:], graph.weights[n] + best[m][1:-1])
        best[n] = row
    return order, best


def max_path_value(graph: ClosedLoopGraph) -> PathValue:
    """Exact max of B over all node-to-TARGET paths, with a witness path."""
    if not graph.nodes:
        return PathValue((TARGET,), 0, 0.0, 0.0)
    _, best = _length_table(graph)
    log_n0 = math.log2(graph.n0)
    lengths = np.arange(graph.n0 + 1, dtype=float)
    lengths[0] = 1.0
    top, arg = -np.inf, None
    for n in graph.nodes:
        finite = np.isfinite(best[n])
        finite[0] = False
        if not finite.any():
            raise MalformedControllerError(f"node {n!r} never reaches the target")
        ratio = np.full(len(lengths), -np.inf)
        ratio[finite] = (best[n][finite] + log_n0) / lengths[finite]
        L = int(np.argmax(ratio >= ratio.max() - TIE_TOL))
        if ratio[L] > top + TIE_TOL:
            top, arg = float(ratio[L]), (n, L)
    n, L = arg
    path = [n]
    remaining = best[n][L]
    while L > 1:
        w = graph.weights[n]
        for m in sorted_succ(graph, n):
            if abs(best[m][L - 1] - (remaining - w)) <= TIE_TOL:
                n, L, remaining = m, L - 1, best[m][L - 1]
                break
        else:
            raise RuntimeError("witness reconstruction lost the optimal path")
        path.append(n)
    path.append(TARGET)
    return path_value(graph, path)


def longest_path(graph: ClosedLoopGraph) -> int:
    """Edge count of the longest node-to-TARGET path."""
    if not graph.nodes:
        return 0
    _, best = _length_table(graph)
    return max(int(np.max(np.nonzero(np.isfinite(best[n]))[0])) for n in graph.nodes)


def enumerate_spanning_set(graph: ClosedLoopGraph, limit: int = 100_000) -> tuple:
    """All node-to-TARGET paths plus the trivial member (TARGET,).

    Returns ``(paths, overflow)``; enumeration stops after ``limit`` paths.
    """
    check_acyclic(graph)
    paths = []
    for root in graph.nodes:
        stack = [(root,)]
        while stack:
            prefix = stack.pop()
            last = prefix[-1]
            nxt = sorted_succ(graph, last)
            if TARGET in graph.successors[last]:
                if len(paths) >= limit:
                    return paths + [(TARGET,)], True
                paths.append(prefix + (TARGET,))
            stack.extend(prefix + (m,) for m in reversed(nxt))
    return paths + [(TARGET,)], False


def prefix_successors(R: Iterable) -> dict:
    children = defaultdict(set)
    for alpha in R:
        for t in range(len(alpha) - 1):
            children[tuple(alpha[: t + 1])].add(alpha[t + 1])
    return children


def spanning_set_value(R: Iterable, mode: str = "exclude-target") -> float:
    """N(R) for an explicit set of sequences, straight from the definition of B."""
    R = [tuple(a) for a in R]
    roots = {a[0] for a in R if a[0] is not TARGET}
    children = prefix_successors(R)
    log_r0 = math.log2(len(roots)) if roots else 0.0
    best = 0.0
    for alpha in R:
        tau = len(alpha)
        if tau == 1:
            continue
        total = log_r0
        for t in range(tau - 2):
            succ = children[alpha[: t + 1]]
            k = len(succ) if mode == "include-target" else len(succ - {TARGET})
            total += math.log2(k)
        best = max(best, total / (tau - 1))
    return best


def graph_spanning_set(graph: ClosedLoopGraph, partition, limit: int = 100_000) -> tuple:
    """Spanning set over the partition's cell sets: ``(R, cover, G, overflow)``.

    G is memoryless: each cover element maps to its group's input.
    """
    paths, overflow = enumerate_spanning_set(graph, limit)
    as_set = {g: partition.groups[g] for g in graph.nodes}
    R = [tuple(TARGET if n is TARGET else as_set[n] for n in p) for p in paths]
    cover = [as_set[g] for g in graph.nodes]
    G = {as_set[g]: partition.group_input[g] for g in graph.nodes}
    return R, cover, G, overflow


def entropy_report(graph: ClosedLoopGraph, label=str) -> dict:
    best = max_path_value(graph)
    return {
        "N_R": best.value,
        "weight_mode": graph.weight_mode,
        "witness_path": [label(n) for n in best.path],
        "node_count": graph.n0 + 1,
        "edge_count": graph.edge_count,
        "longest_path": longest_path(graph),
    }


def to_dot(graph: ClosedLoopGraph, name: str = "closed_loop") -> str:
    lines = [f"digraph {name} {{", "  rankdir=LR;"]
    for n in graph.nodes:
        lines.append(f'  "g{n}" [label="g{n}\\nw={graph.weights[n]:.4f}"];')
    lines.append('  "T" [label="T", shape=doublecircle, style=filled, fillcolor=lightgrey];')
    for n in graph.nodes:
        w = f"{graph.weights[n]:.4f}"
        for m in sorted_succ(graph, n):
            lines.append(f'  "g{n}" -> "g{m}" [label="{w}"];')
        if TARGET in graph.successors[n]:
            lines.append(f'  "g{n}" -> "T" [label="{w}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
