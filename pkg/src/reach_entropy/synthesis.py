"""Reach-while-stay controller synthesis by a backward fixed point."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Mapping

from .system_model import ordered


@dataclass(frozen=True)
class ReachController:
    """Memoryless controller on the winning non-target cells.

    ``value[c]`` is the sweep at which c entered the winning set; every
    successor of c under ``assignment[c]`` is a target cell or has a smaller
    value. ``assignment`` iterates in the abstract system's state order.
    """

    assignment: Mapping
    value: Mapping

    @property
    def domain(self) -> frozenset:
        return frozenset(self.assignment)

    @property
    def max_value(self) -> int:
        return max(self.value.values(), default=0)

    def stats(self) -> dict:
        return {"domain_size": len(self.assignment), "max_value": self.max_value}

    def to_csv(self, input_label=repr) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        first = next(iter(self.assignment), None)
        width = len(first) if isinstance(first, tuple) else 1
        writer.writerow([f"cell_{k}" for k in range(width)] + ["input", "value"])
        for cell, u in self.assignment.items():
            idx = list(cell) if isinstance(cell, tuple) else [cell]
            writer.writerow(idx + [input_label(u), self.value[cell]])
        return buf.getvalue()


def synthesize(abstract, q_cells, t_cells) -> ReachController:
    """Minimal fixed point W0 = T, W_{k+1} = W_k ∪ {c : some input has nonempty post ⊆ W_k}.

    Among witnessing inputs the one declared first wins.
    """
    q_cells, t_cells = frozenset(q_cells), frozenset(t_cells)
    if not t_cells <= q_cells:
        raise ValueError("target cells must be a subset of the safe cells")
    order = [c for c in abstract.states if c in q_cells and c not in t_cells]
    options = {c: abstract.choices(c) for c in order}
    won = set(t_cells)
    assignment, value = {}, {}
    sweep = 0
    pending = order
    while pending:
        sweep += 1
        gained = {}
        for c in pending:
            for u, succ in options[c]:
                if succ and succ <= won:
                    gained[c] = u
                    break
        if not gained:
            break
        for c, u in gained.items():
            assignment[c] = u
            value[c] = sweep
        won.update(gained)
        pending = [c for c in pending if c not in gained]
    assigned = {c: assignment[c] for c in order if c in assignment}
    return ReachController(assigned, {c: value[c] for c in assigned})


def check_reachability_satisfiable(controller: ReachController, q_cells, t_cells) -> tuple:
    """(True, []) when the controller covers Q \\ T, else (False, uncovered cells)."""
    missing = set(q_cells) - set(t_cells) - controller.domain
    return (not missing, ordered(missing))
