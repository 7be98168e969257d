"""Finite abstractions of continuous-space systems.

Two flavours share one result type:

* a uniform grid (half-open cells anchored at the lower bound, last cell clipped),
* an explicit list of boxes, for hand-made partitions such as the two-cell
  cover of the scalar example.

The quantizer x -> cell(x) is single valued and the abstract successors of a
cell overapproximate the image of its box, so the quantizer is a feedback
refinement relation from the concrete system to the abstract one. Everything
outside the safe cells collapses to :data:`UNSAFE`, whose successors are all
abstract states.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import os
import pickle
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .boxes import Box, grid_counts, resolve_shared_faces
from .errors import DomainError, EmptyTargetError
from .system_model import ContinuousSystem, FiniteSystem, ReachSpec, sequence_inputs

log = logging.getLogger(__name__)


class _Unsafe:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "unsafe"

    def __reduce__(self):
        return (_Unsafe, ())

    def __lt__(self, other):
        return False

    def __gt__(self, other):
        return other is not self


UNSAFE = _Unsafe()


@dataclass(frozen=True)
class Grid:
    lower: tuple
    upper: tuple
    eta: tuple
    counts: tuple

    @property
    def dim(self) -> int:
        return len(self.lower)

    def cells(self):
        return itertools.product(*(range(n) for n in self.counts))

    def cell_box(self, idx) -> Box:
        lo = [l + k * e for l, k, e in zip(self.lower, idx, self.eta)]
        hi = [min(a + e, u) for a, e, u in zip(lo, self.eta, self.upper)]
        closed_top = [k == n - 1 for k, n in zip(idx, self.counts)]
        return Box(lo, hi, None, closed_top)

    def index_bounds(self, lo, hi):
        """Cell-index range touched by closed boxes [lo, hi] (rows), plus an outside-grid flag.

        Ranges are clipped to the grid; a box entirely off the grid yields lo > hi.
        """
        lower, upper, eta = (np.asarray(a) for a in (self.lower, self.upper, self.eta))
        counts = np.asarray(self.counts)
        outside = np.any(lo < lower, axis=-1) | np.any(hi > upper, axis=-1)
        ilo = np.floor((lo - lower) / eta).astype(np.int64)
        ihi = np.floor((hi - lower) / eta).astype(np.int64)
        ilo = np.clip(ilo, 0, None)
        ihi = np.minimum(ihi, counts - 1)
        return ilo, ihi, outside


def build_grid(bounds, eta) -> Grid:
    """Grid over a box; ``bounds`` is a :class:`Box` or a ``(lower, upper)`` pair."""
    lower, upper = (bounds.lower, bounds.upper) if isinstance(bounds, Box) else bounds
    lower = tuple(float(v) for v in np.atleast_1d(lower))
    upper = tuple(float(v) for v in np.atleast_1d(upper))
    eta = tuple(float(v) for v in np.atleast_1d(eta))
    if len(eta) == 1 and len(lower) > 1:
        eta = eta * len(lower)
    try:
        counts = grid_counts(lower, upper, eta)
    except ValueError as exc:
        raise DomainError(str(exc)) from None
    return Grid(lower, upper, eta, counts)


def quantize(grid: Grid, x) -> tuple:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < grid.lower) or np.any(x > grid.upper):
        raise DomainError(f"point {x} outside grid bounds")
    ilo, _, _ = grid.index_bounds(x[None, :], x[None, :])
    idx = np.minimum(ilo[0], np.asarray(grid.counts) - 1)
    return tuple(int(i) for i in idx)


def overapprox_image(dynamics, cell_box: Box, u) -> Box:
    """Box containing f(cell_box, u); exact for affine and monotone room models."""
    return dynamics.image(cell_box, np.atleast_1d(np.asarray(u, dtype=float)))


class GridTransitionSystem:
    """Abstract system on grid cells.

    Successor sets are recomputed from the model on demand; ``choices`` is
    tabulated at build time with one representative (the lowest-index input)
    per distinct successor set.
    """

    def __init__(self, grid, model, inputs, q_cells, choice_table, transition_count):
        self.grid = grid
        self.model = model
        self.inputs = inputs
        self.q_cells = frozenset(q_cells)
        self.states = tuple(sorted(self.q_cells)) + (UNSAFE,)
        self._choices = choice_table
        self.transition_count = transition_count
        counts = np.asarray(grid.counts)
        nonq = np.ones(grid.counts, dtype=np.int64)
        for c in self.q_cells:
            nonq[c] = 0
        self._nonq_table = _summed_area(nonq)
        self._counts = counts

    @cached_property
    def state_set(self) -> frozenset:
        return frozenset(self.states)

    @cached_property
    def input_set(self) -> frozenset:
        return frozenset(self.inputs)

    @cached_property
    def state_index(self) -> dict:
        return {x: i for i, x in enumerate(self.states)}

    def _rows(self, cell, inputs):
        box = self.grid.cell_box(cell)
        lo, hi = self.model.image_bounds(box.lower, box.upper, inputs)
        ilo, ihi, outside = self.grid.index_bounds(lo, hi)
        empty = np.any(ilo > ihi, axis=-1)
        touches_nonq = _box_sums(self._nonq_table, ilo, ihi) > 0
        unsafe = outside | (touches_nonq & ~empty)
        ilo = np.where(empty[:, None], 0, ilo)
        ihi = np.where(empty[:, None], -1, ihi)
        return np.concatenate([ilo, ihi, unsafe[:, None].astype(np.int64)], axis=1)

    def _decode(self, row) -> frozenset:
        n = self.grid.dim
        ranges = [range(int(a), int(b) + 1) for a, b in zip(row[:n], row[n:2 * n])]
        succ = {c for c in itertools.product(*ranges) if c in self.q_cells}
        if row[-1]:
            succ.add(UNSAFE)
        return frozenset(succ)

    def post(self, state, u) -> frozenset:
        if state not in self.state_set:
            raise DomainError(f"unknown state {state!r}")
        if state is UNSAFE:
            return self.state_set
        u = tuple(float(v) for v in np.atleast_1d(u))
        return self._decode(self._rows(state, np.asarray([u]))[0])

    def post_set(self, states, u) -> frozenset:
        out = set()
        for x in states:
            out |= self.post(x, u)
        return frozenset(out)

    def choices(self, state) -> list:
        if state is UNSAFE:
            return [(self.inputs[0], self.state_set)]
        return [(self.inputs[k], self._decode(row)) for k, row in self._choices[state]]

    def outgoing(self, state) -> list:
        if state is UNSAFE:
            return [(u, self.state_set) for u in self.inputs]
        rows = self._rows(state, np.asarray(self.inputs))
        return [(u, self._decode(r)) for u, r in zip(self.inputs, rows)]


def _summed_area(a: np.ndarray) -> np.ndarray:
    s = np.pad(a, [(1, 0)] * a.ndim)
    for ax in range(a.ndim):
        s = np.cumsum(s, axis=ax)
    return s


def _box_sums(table: np.ndarray, ilo: np.ndarray, ihi: np.ndarray) -> np.ndarray:
    """Sum of the underlying array over inclusive index boxes (one per row)."""
    n = ilo.shape[1]
    total = np.zeros(len(ilo), dtype=np.int64)
    valid = np.all(ilo <= ihi, axis=1)
    for corner in itertools.product((0, 1), repeat=n):
        idx = tuple(np.where(valid, ihi[:, k] + 1, 0) if c else np.where(valid, ilo[:, k], 0) for k, c in enumerate(corner))
        sign = (-1) ** (n - sum(corner))
        total += sign * table[idx]
    return np.where(valid, total, 0)


@dataclass(frozen=True, eq=False)
class Abstraction:
    """Finite abstraction plus the quantization relation.

    ``boxes`` maps each safe cell to its (possibly half-open) box.
    """

    abstract_system: Any
    q_cells: frozenset
    t_cells: frozenset
    boxes: Mapping
    model: Any
    inputs: tuple
    grid: Grid | None = None
    cell_order: tuple = field(default=())

    def relation(self, x):
        """The cell containing x, or UNSAFE when x lies outside every safe cell."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.grid is not None:
            if np.any(x < self.grid.lower) or np.any(x > self.grid.upper):
                return UNSAFE
            cell = quantize(self.grid, x)
            return cell if cell in self.q_cells else UNSAFE
        for c in self.cell_order:
            if self.boxes[c].contains(x):
                return c if c in self.q_cells else UNSAFE
        return UNSAFE

    @property
    def non_target_cells(self) -> frozenset:
        return self.q_cells - self.t_cells

    def stats(self) -> dict:
        return {
            "q_cell_count": len(self.q_cells),
            "t_cell_count": len(self.t_cells),
            "transition_count": int(self.abstract_system.transition_count),
        }


GridAbstraction = Abstraction


def _cell_inside(box: Box, region) -> bool:
    return box.is_covered_by(region)


def _hull(boxes) -> Box:
    lo = np.min([b.lower for b in boxes], axis=0)
    hi = np.max([b.upper for b in boxes], axis=0)
    return Box(lo, hi)


def cache_key(system: ContinuousSystem, spec: ReachSpec, bounds: Box, eta, inputs) -> str:
    payload = {
        "model": system.model_name,
        "params": {k: np.asarray(v).tolist() for k, v in sorted(system.params.items())},
        "bounds": [bounds.lower, bounds.upper],
        "eta": list(np.atleast_1d(eta).astype(float)),
        "inputs": hashlib.sha256(np.asarray(inputs, dtype=float).tobytes()).hexdigest(),
        "safe": [repr(b) for b in spec.safe],
        "target": [repr(b) for b in spec.target],
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:24]


def default_cache_dir() -> Path:
    return Path(os.environ.get("REACH_ENTROPY_CACHE_DIR", Path.home() / ".cache" / "reach_entropy"))


def build_abstraction(
    system: ContinuousSystem,
    spec: ReachSpec,
    eta_s,
    inputs: Sequence,
    *,
    bounds: Box | None = None,
    threads: int = 1,
    cache: bool = False,
    cache_dir: str | os.PathLike | None = None,
) -> Abstraction:
    """Uniform-grid abstraction; safe/target cells are inner approximations of Q/T."""
    inputs = sequence_inputs(inputs)
    model = system.model
    model.check_inputs(inputs)
    bounds = bounds or _hull(system.state_domain)
    grid = build_grid(bounds, eta_s)

    path = None
    if cache:
        path = Path(cache_dir or default_cache_dir()) / f"abstraction-{cache_key(system, spec, bounds, grid.eta, inputs)}.pkl"
        if path.exists():
            log.info("loading cached abstraction %s", path)
            with open(path, "rb") as fh:
                return pickle.load(fh)

    boxes, q_cells, t_cells = {}, set(), set()
    for c in grid.cells():
        box = grid.cell_box(c)
        if _cell_inside(box, spec.safe):
            q_cells.add(c)
            boxes[c] = box
            if _cell_inside(box, spec.target):
                t_cells.add(c)
    if not t_cells:
        raise EmptyTargetError("the target set contains no whole grid cell; refine eta_s")

    system_ = GridTransitionSystem(grid, model, inputs, q_cells, {}, 0)
    u_arr = np.asarray(inputs, dtype=float)

    def tabulate(cell):
        rows = system_._rows(cell, u_arr)
        uniq, first, inverse = np.unique(rows, axis=0, return_index=True, return_inverse=True)
        order = np.argsort(first)
        n = grid.dim
        sizes = np.prod(np.maximum(uniq[:, n:2 * n] - uniq[:, :n] + 1, 0), axis=1) + uniq[:, -1]
        multiplicity = np.bincount(inverse.ravel(), minlength=len(uniq))
        return cell, [(int(first[i]), uniq[i]) for i in order], int(np.dot(sizes, multiplicity))

    table, count = {}, 0
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for cell, entries, n_trans in pool.map(tabulate, sorted(q_cells)):
            table[cell] = entries
            count += n_trans
    system_._choices = table
    system_.transition_count = count

    result = Abstraction(
        abstract_system=system_,
        q_cells=frozenset(q_cells),
        t_cells=frozenset(t_cells),
        boxes=boxes,
        model=model,
        inputs=inputs,
        grid=grid,
        cell_order=tuple(sorted(q_cells)),
    )
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            pickle.dump(result, fh)
    return result


def build_partition_abstraction(
    system: ContinuousSystem,
    spec: ReachSpec,
    cells: Sequence,
    inputs: Sequence,
) -> Abstraction:
    """Abstraction over an explicit box partition given as ``(name, Box)`` pairs.

    Shared faces belong to the box listed first. Successors are the safe cells
    met by the image; UNSAFE is added when the image is not covered by them.
    """
    inputs = sequence_inputs(inputs)
    model = system.model
    model.check_inputs(inputs)
    names = [name for name, _ in cells]
    if len(set(names)) != len(names):
        raise ValueError("cell names must be unique")
    resolved = dict(zip(names, resolve_shared_faces([b for _, b in cells])))
    q_cells = [c for c in names if _cell_inside(resolved[c], spec.safe)]
    t_cells = [c for c in q_cells if _cell_inside(resolved[c], spec.target)]
    if not t_cells:
        raise EmptyTargetError("the target set contains no whole cell")
    q_boxes = [resolved[c] for c in q_cells]

    transitions = {}
    for c in q_cells:
        for u in inputs:
            img = model.image(resolved[c], np.asarray(u))
            succ = {d for d in q_cells if img.intersects(resolved[d])}
            if not img.is_covered_by(q_boxes):
                succ.add(UNSAFE)
            transitions[(c, u)] = succ
    states = tuple(q_cells) + (UNSAFE,)
    for u in inputs:
        transitions[(UNSAFE, u)] = set(states)
    abstract = FiniteSystem(states, inputs, transitions)
    return Abstraction(
        abstract_system=abstract,
        q_cells=frozenset(q_cells),
        t_cells=frozenset(t_cells),
        boxes={c: resolved[c] for c in q_cells},
        model=model,
        inputs=inputs,
        grid=None,
        cell_order=tuple(names),
    )


def soundness_violations(abstraction: Abstraction, n_samples: int, rng: np.random.Generator) -> list:
    """Sample x in random safe non-target cells and random inputs; report (cell, x, u, cell(f(x,u))) misses."""
    cells = sorted(abstraction.non_target_cells, key=repr)
    if not cells:
        return []
    system = abstraction.abstract_system
    model = abstraction.model
    out = []
    picks = rng.integers(len(cells), size=n_samples)
    upicks = rng.integers(len(abstraction.inputs), size=n_samples)
    for ci, ui in zip(picks, upicks):
        cell = cells[ci]
        x = abstraction.boxes[cell].sample(rng, 1)[0]
        u = abstraction.inputs[ui]
        y = model(x, np.asarray(u))
        target = abstraction.relation(y)
        if abstraction.relation(x) != cell or target not in system.post(cell, u):
            out.append((cell, tuple(x), u, target))
    return out
