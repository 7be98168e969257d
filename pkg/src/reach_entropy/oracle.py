"""Brute-force reachability entropy of tiny finite systems.

The search runs over reach-spanning sets whose elements are arbitrary subsets
of Q \\ T and whose input choice may depend on the whole prefix. Shrinking an
element never hurts (fewer successors, smaller image), so at each node the
children can be taken as a partition of exactly the non-target part of the
image. That turns the search into a dynamic program over bitmasks:

    V(S, d) = -theta + min_u max([F(S,u) meets T] ? 0 : -inf,
                                 min_k log2 k + M_k(F(S,u) \\ T, d - 1))

where M_k(X, d) is the smallest achievable max_j V(C_j, d) over partitions of
X into k blocks. A set of sequences with N(R) <= theta exists iff
min_k log2 k + M_k(Q \\ T, D) <= 0, so theta is found by bisection and the
reported entropy is the exact N(R) of the witness built at the upper end.

Path lengths are bounded by ``max_len``; long idle paths dilute B, so the
value is the minimum over that bounded family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .entropy_graph import spanning_set_value, prefix_successors
from .errors import MalformedWitnessError, OracleCapError
from .system_model import TARGET, FiniteSystem, ReachSpec, ordered

MAX_STATES = 8
BISECT_TOL = 1e-12


@dataclass(frozen=True)
class OracleResult:
    entropy: float
    witness_cover: tuple = ()
    witness_spanning_set: tuple = ()
    witness_inputs: dict = field(default_factory=dict)
    search_bounds: dict = field(default_factory=dict)

    @property
    def satisfiable(self) -> bool:
        return math.isfinite(self.entropy)


@lru_cache(maxsize=None)
def _submask_pairs(m: int):
    """(X, C) with C a proper-or-full submask of X containing X's lowest bit."""
    xs, cs = [], []
    for x in range(1, 1 << m):
        low = x & -x
        rest = x ^ low
        sub = rest
        while True:
            xs.append(x)
            cs.append(sub | low)
            if sub == 0:
                break
            sub = (sub - 1) & rest
    return np.asarray(xs), np.asarray(cs)


class _Problem:
    def __init__(self, system: FiniteSystem, spec: ReachSpec):
        self.remainder = ordered(spec.remainder)
        self.bit = {x: i for i, x in enumerate(self.remainder)}
        self.m = len(self.remainder)
        self.full = (1 << self.m) - 1
        self.inputs = list(system.inputs)
        size = 1 << self.m
        # per input: image mask over Q \ T, meets-T flag, usable flag
        self.img = np.zeros((len(self.inputs), size), dtype=np.int64)
        self.hits = np.zeros((len(self.inputs), size), dtype=bool)
        self.usable = np.zeros((len(self.inputs), size), dtype=bool)
        for j, u in enumerate(self.inputs):
            one_img, one_hit, one_ok = [], [], []
            for x in self.remainder:
                succ = system.post(x, u)
                one_ok.append(bool(succ) and succ <= spec.safe)
                one_hit.append(bool(succ & spec.target))
                one_img.append(sum(1 << self.bit[y] for y in succ if y in self.bit))
            for s in range(1, size):
                low = (s & -s).bit_length() - 1
                prev = s & (s - 1)
                self.img[j, s] = self.img[j, prev] | one_img[low]
                self.hits[j, s] = self.hits[j, prev] | one_hit[low]
                self.usable[j, s] = (self.usable[j, prev] or prev == 0) and one_ok[low]
        self.pair_x, self.pair_c = _submask_pairs(self.m)
        self.logk = np.log2(np.arange(1, self.m + 1))

    def blocks(self, V):
        """M[k-1][X] for k = 1..m, the min over k-block partitions of the max block value."""
        size = 1 << self.m
        out = [V.copy()]
        for _ in range(1, self.m):
            prev = out[-1]
            cand = np.maximum(V[self.pair_c], prev[self.pair_x ^ self.pair_c])
            cand[self.pair_x == self.pair_c] = np.inf
            cur = np.full(size, np.inf)
            np.minimum.at(cur, self.pair_x, cand)
            out.append(cur)
        return np.stack(out)

    def best_split(self, M):
        best = np.min(self.logk[:, None] + M, axis=0)
        best[0] = -np.inf
        return best

    def tables(self, theta: float, depth: int):
        size = 1 << self.m
        V = np.full(size, np.inf)
        V[0] = -np.inf
        history = [V]
        for _ in range(depth):
            best = self.best_split(self.blocks(V))
            newV = np.full(size, np.inf)
            for j in range(len(self.inputs)):
                tail = best[self.img[j]]
                val = np.where(self.hits[j], np.maximum(0.0, tail), tail)
                val = np.where(self.usable[j], val, np.inf)
                newV = np.minimum(newV, val - theta)
            newV[0] = -np.inf
            V = newV
            history.append(V)
        return history

    def root_value(self, history) -> float:
        M = self.blocks(history[-1])
        return float(np.min(self.logk + M[:, self.full]))


def _partition(problem: _Problem, V, X: int, k: int, target: float):
    """Recover a k-block partition of X with every block value <= target."""
    blocks = []
    while k > 1:
        M = problem.blocks(V)
        low = X & -X
        rest = X ^ low
        sub = rest
        found = None
        while True:
            c = sub | low
            if c != X and V[c] <= target + 1e-9 and M[k - 2][X ^ c] <= target + 1e-9:
                found = c
                break
            if sub == 0:
                break
            sub = (sub - 1) & rest
        if found is None:
            raise RuntimeError("partition reconstruction failed")
        blocks.append(found)
        X ^= found
        k -= 1
    blocks.append(X)
    return blocks


def _witness(problem: _Problem, history, theta: float):
    """Trie of masks with prefix-dependent inputs achieving the root condition at ``theta``."""
    depth = len(history) - 1
    M = problem.blocks(history[depth])
    vals = problem.logk + M[:, problem.full]
    k0 = int(np.argmin(vals)) + 1
    roots = _partition(problem, history[depth], problem.full, k0, float(M[k0 - 1, problem.full]))
    paths, inputs = [], {}

    def expand(prefix, mask, d):
        V_child = history[d - 1]
        best = problem.best_split(problem.blocks(V_child)) if d > 1 else None
        goal = history[d][mask] + theta
        for j in range(len(problem.inputs)):
            if not problem.usable[j, mask]:
                continue
            X = int(problem.img[j, mask])
            if X == 0:
                tail = -np.inf
            elif best is None:
                continue
            else:
                tail = best[X]
            val = max(0.0, tail) if problem.hits[j, mask] else tail
            if val <= goal + 1e-9:
                break
        else:
            raise RuntimeError("no input attains the recorded value")
        inputs[prefix] = problem.inputs[j]
        if problem.hits[j, mask]:
            paths.append(prefix + (TARGET,))
        if X:
            Mc = problem.blocks(V_child)
            ks = [k for k in range(1, bin(X).count("1") + 1) if problem.logk[k - 1] + Mc[k - 1, X] <= tail + 1e-9]
            k = ks[0]
            for c in _partition(problem, V_child, X, k, float(Mc[k - 1, X])):
                expand(prefix + (c,), c, d - 1)

    for r in roots:
        expand((r,), r, depth)
    return roots, paths, inputs


def _to_sets(problem: _Problem, mask: int) -> frozenset:
    return frozenset(x for x in problem.remainder if mask >> problem.bit[x] & 1)


def exact_entropy(
    system: FiniteSystem,
    spec: ReachSpec,
    max_cover_size: int | None = None,
    max_len: int | None = None,
    *,
    memoryless: bool = False,
    max_states: int = MAX_STATES,
) -> OracleResult:
    """Minimum of N(R) over reach-spanning sets with paths of at most ``max_len`` elements.

    By default inputs may depend on the whole prefix and elements are any
    subsets of Q \\ T. With ``memoryless=True`` the search instead enumerates
    covers of at most ``max_cover_size`` elements and maps G from elements to
    inputs, which can only give a larger (or equal) value.
    """
    if memoryless:
        return memoryless_entropy(system, spec, max_cover_size, max_len, max_states=max_states)
    problem = _Problem(system, spec)
    m = problem.m
    if m > max_states:
        raise OracleCapError(f"#(Q \\ T) = {m} exceeds the oracle cap of {max_states}")
    if max_len is None:
        max_len = m + 1
    bounds = {"states": m, "inputs": len(problem.inputs), "max_len": max_len}
    if m == 0:
        return OracleResult(0.0, (), ((TARGET,),), {}, bounds)
    depth = max_len - 1
    if depth < 1:
        return OracleResult(math.inf, search_bounds=bounds)

    hi = math.log2(m) + 1.0
    if problem.root_value(problem.tables(hi, depth)) > 0:
        return OracleResult(math.inf, search_bounds=bounds)
    lo = 0.0
    if problem.root_value(problem.tables(lo, depth)) <= 0:
        hi = lo
    while hi - lo > BISECT_TOL:
        mid = (lo + hi) / 2
        if problem.root_value(problem.tables(mid, depth)) <= 0:
            hi = mid
        else:
            lo = mid
    history = problem.tables(hi, depth)
    roots, paths, inputs = _witness(problem, history, hi)

    as_set = lambda p: tuple(TARGET if e is TARGET else _to_sets(problem, e) for e in p)
    R = tuple(as_set(p) for p in paths) + ((TARGET,),)
    G = {as_set(p): u for p, u in inputs.items()}
    cover = tuple(dict.fromkeys(e for a in R for e in a if e is not TARGET))
    value = spanning_set_value(R, mode="exclude-target")
    bounds.update({"theta_low": lo, "theta_high": hi, "roots": len(roots), "paths": len(paths)})
    return OracleResult(value, cover, R, G, bounds)


def _cover_value(elements, images, hits, usable, roots_ok, theta: float, depth: int) -> float:
    """Root condition value for a fixed memoryless (A, G); <= 0 means N(R) <= theta is achievable.

    ``images[i]`` is the non-target image mask of element i under G, and the
    children of i may be any subfamily of A covering it.
    """
    n = len(elements)
    fams = range(1, 1 << n)
    union = [0] * (1 << n)
    for f in fams:
        low = (f & -f).bit_length() - 1
        union[f] = union[f & (f - 1)] | elements[low]
    size = [bin(f).count("1") for f in range(1 << n)]
    V = [math.inf] * n
    for _ in range(depth):
        new = []
        for i in range(n):
            if not usable[i]:
                new.append(math.inf)
                continue
            X = images[i]
            if X == 0:
                tail = -math.inf
            else:
                tail = min(
                    (math.log2(size[f]) + max(V[j] for j in range(n) if f >> j & 1) for f in fams if union[f] & X == X),
                    default=math.inf,
                )
            val = max(0.0, tail) if hits[i] else tail
            new.append(val - theta)
        V = new
    return min(
        (math.log2(size[f]) + max(V[j] for j in range(n) if f >> j & 1) for f in fams if roots_ok(union[f])),
        default=math.inf,
    )


def _memoryless_witness(problem, elements, G_idx, theta, depth):
    """Prefix trie for a fixed (A, G) at ``theta``; mirrors :func:`_cover_value`."""
    n = len(elements)
    images = [int(problem.img[G_idx[i], elements[i]]) for i in range(n)]
    hits = [bool(problem.hits[G_idx[i], elements[i]]) for i in range(n)]

    def union(f):
        out = 0
        for j in range(n):
            if f >> j & 1:
                out |= elements[j]
        return out

    tables = [[math.inf] * n]
    for _ in range(depth):
        V = tables[-1]
        new = []
        for i in range(n):
            X = images[i]
            tail = -math.inf if X == 0 else min(
                (math.log2(bin(f).count("1")) + max(V[j] for j in range(n) if f >> j & 1)
                 for f in range(1, 1 << n) if union(f) & X == X),
                default=math.inf,
            )
            new.append((max(0.0, tail) if hits[i] else tail) - theta)
        tables.append(new)

    def pick(V, need):
        scored = [
            (math.log2(bin(f).count("1")) + max(V[j] for j in range(n) if f >> j & 1), f)
            for f in range(1, 1 << n)
            if union(f) & need == need
        ]
        return min(scored)[1]

    paths = []

    def expand(prefix, i, d):
        if hits[i]:
            paths.append(prefix + (TARGET,))
        if images[i]:
            f = pick(tables[d - 1], images[i])
            for j in range(n):
                if f >> j & 1:
                    expand(prefix + (j,), j, d - 1)

    root = pick(tables[depth], problem.full)
    for j in range(n):
        if root >> j & 1:
            expand((j,), j, depth)
    return paths


def memoryless_entropy(
    system: FiniteSystem,
    spec: ReachSpec,
    max_cover_size: int | None = None,
    max_len: int | None = None,
    *,
    max_states: int = MAX_STATES,
) -> OracleResult:
    """Enumerate covers of Q \\ T and memoryless G; exponential, meant for #(Q \\ T) <= 4."""
    import itertools

    problem = _Problem(system, spec)
    m = problem.m
    if m > max_states:
        raise OracleCapError(f"#(Q \\ T) = {m} exceeds the oracle cap of {max_states}")
    max_len = m + 1 if max_len is None else max_len
    max_cover_size = m if max_cover_size is None else max_cover_size
    bounds = {"states": m, "inputs": len(problem.inputs), "max_len": max_len, "max_cover_size": max_cover_size}
    if m == 0:
        return OracleResult(0.0, (), ((TARGET,),), {}, bounds)
    depth = max_len - 1
    if depth < 1:
        return OracleResult(math.inf, search_bounds=bounds)
    full = problem.full
    roots_ok = lambda mask: mask == full
    n_in = len(problem.inputs)
    best, best_key = math.inf, None
    for k in range(1, max_cover_size + 1):
        for elements in itertools.combinations(range(1, full + 1), k):
            cover_union = 0
            for e in elements:
                cover_union |= e
            if cover_union != full:
                continue
            options = [[j for j in range(n_in) if problem.usable[j, e]] for e in elements]
            if any(not o for o in options):
                continue
            for G_idx in itertools.product(*options):
                images = [int(problem.img[G_idx[i], e]) for i, e in enumerate(elements)]
                hits = [bool(problem.hits[G_idx[i], e]) for i, e in enumerate(elements)]
                usable = [True] * k
                cap = min(best, math.log2(m) + 1.0)
                if _cover_value(elements, images, hits, usable, roots_ok, cap - BISECT_TOL, depth) > 0:
                    continue
                lo, hi = 0.0, cap - BISECT_TOL
                if _cover_value(elements, images, hits, usable, roots_ok, lo, depth) <= 0:
                    hi = lo
                while hi - lo > BISECT_TOL:
                    mid = (lo + hi) / 2
                    if _cover_value(elements, images, hits, usable, roots_ok, mid, depth) <= 0:
                        hi = mid
                    else:
                        lo = mid
                paths = _memoryless_witness(problem, elements, G_idx, hi, depth)
                sets = [_to_sets(problem, e) for e in elements]
                R = tuple(tuple(sets[i] for i in p[:-1]) + (TARGET,) for p in paths) + ((TARGET,),)
                value = spanning_set_value(R, mode="exclude-target")
                if value < best:
                    G = {sets[i]: problem.inputs[G_idx[i]] for i in range(k)}
                    best, best_key = value, (tuple(sets), R, G)
    if best_key is None:
        return OracleResult(math.inf, search_bounds=bounds)
    cover, R, G = best_key
    return OracleResult(best, cover, R, G, bounds)


def trivial_input(system: FiniteSystem, spec: ReachSpec):
    """An input that alone drives all of Q \\ T into T in finite time without leaving Q, or None.

    With such an input one cover element and no branching suffice, so h = 0.
    """
    for u in system.inputs:
        won = set(spec.target)
        changed = True
        while changed:
            changed = False
            for x in spec.remainder - won:
                succ = system.post(x, u)
                if succ and succ <= won:
                    won.add(x)
                    changed = True
        if spec.remainder <= won:
            return u
    return None


def one_step_input(system: FiniteSystem, spec: ReachSpec):
    """An input sending every state of Q \\ T into T in one step, or None (then h = 0 when found)."""
    for u in system.inputs:
        if all(system.post(x, u) and system.post(x, u) <= spec.target for x in spec.remainder):
            return u
    return None


def _lookup_input(G, prefix):
    if callable(G):
        return G(prefix)
    if prefix in G:
        return G[prefix]
    if prefix[-1] in G:
        return G[prefix[-1]]
    raise KeyError(prefix)


def verify_spanning_set(system: FiniteSystem, spec: ReachSpec, cover, G, R, require_nonblocking: bool = False) -> tuple:
    """Check the three reach-spanning conditions; returns ``(ok, report)``.

    ``G`` maps a prefix tuple, or a single element, to an input, or is a
    callable on prefixes. With ``require_nonblocking`` a state with no
    successor under its input also counts as a failure.
    """
    R = [tuple(a) for a in R]
    cover = [frozenset(c) for c in cover]
    problems = []
    for a in R:
        if not a or a[-1] is not TARGET or TARGET in a[:-1]:
            problems.append(f"sequence {a!r} must end with T and contain it only there")
        for e in a[:-1]:
            if frozenset(e) not in cover:
                problems.append(f"element {set(e)!r} is not in the cover")
    firsts = set()
    for a in R:
        firsts |= spec.target if a[0] is TARGET else set(a[0])
    if not spec.safe <= firsts:
        problems.append(f"first elements miss {ordered(spec.safe - firsts)!r}")
    children = prefix_successors(R)
    for prefix, succ in children.items():
        try:
            u = _lookup_input(G, prefix)
        except KeyError:
            problems.append(f"no input for prefix {prefix!r}")
            continue
        allowed = set()
        for e in succ:
            allowed |= spec.target if e is TARGET else set(e)
        for x in prefix[-1]:
            img = system.post(x, u)
            if not img and require_nonblocking:
                problems.append(f"state {x!r} blocks under {u!r}")
            elif not img <= allowed:
                problems.append(f"F({x!r}, {u!r}) not covered after prefix {prefix!r}")
    ok = not problems
    report = {"ok": ok, "problems": problems, "N_R": spanning_set_value(R, mode="exclude-target") if ok else None}
    return ok, report


def check_witness(system: FiniteSystem, spec: ReachSpec, result: OracleResult) -> None:
    """Raise MalformedWitnessError unless the oracle's witness is a valid spanning set with value ``entropy``."""
    if not result.satisfiable:
        return
    ok, report = verify_spanning_set(system, spec, result.witness_cover, result.witness_inputs, result.witness_spanning_set, require_nonblocking=True)
    if not ok:
        raise MalformedWitnessError("; ".join(report["problems"]))
    if abs(report["N_R"] - result.entropy) > 1e-9:
        raise MalformedWitnessError(f"witness value {report['N_R']} != reported {result.entropy}")
