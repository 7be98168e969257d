"""Group controller cells that share a control input."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Mapping

from .errors import MalformedControllerError
from .synthesis import ReachController
from .system_model import TARGET

MODES = ("input", "input-value", "none")


@dataclass(frozen=True)
class CoarsePartition:
    groups: tuple
    group_input: tuple
    group_of: Mapping
    mode: str

    def __len__(self):
        return len(self.groups)

    def to_csv(self, input_label=repr) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["kind", "key", "group"])
        for g, u in enumerate(self.group_input):
            writer.writerow(["group", input_label(u), g])
        for cell, g in self.group_of.items():
            writer.writerow(["cell", repr(cell), g])
        return buf.getvalue()


def coarsen(controller: ReachController, mode: str = "input") -> CoarsePartition:
    """Equivalence classes of the key (input), (input, value), or the cell itself.

    Groups are numbered by first appearance in the controller's cell order.
    """
    if mode not in MODES:
        raise ValueError(f"unknown coarsening mode {mode!r}; choose from {MODES}")
    if not controller.assignment:
        raise MalformedControllerError("cannot coarsen an empty controller")
    keys, members, group_of = {}, [], {}
    for cell, u in controller.assignment.items():
        if mode == "input":
            key = u
        elif mode == "input-value":
            key = (u, controller.value[cell])
        else:
            key = cell
        if key not in keys:
            keys[key] = len(members)
            members.append([])
        g = keys[key]
        members[g].append(cell)
        group_of[cell] = g
    groups = tuple(frozenset(m) for m in members)
    inputs = tuple(controller.assignment[m[0]] for m in members)
    return CoarsePartition(groups, inputs, group_of, mode)


def coarse_d_map(abstract, partition: CoarsePartition, t_cells) -> dict:
    """D(g): groups (and TARGET) met by the successors of g's cells under g's input."""
    t_cells = frozenset(t_cells)
    d_map = {}
    for g, (cells, u) in enumerate(zip(partition.groups, partition.group_input)):
        succ = set()
        for c in cells:
            for y in abstract.post(c, u):
                if y in t_cells:
                    succ.add(TARGET)
                elif y in partition.group_of:
                    succ.add(partition.group_of[y])
                else:
                    raise MalformedControllerError(
                        f"cell {c!r} under {u!r} can reach {y!r}, which is neither target nor controlled"
                    )
        d_map[g] = frozenset(succ)
    return d_map
