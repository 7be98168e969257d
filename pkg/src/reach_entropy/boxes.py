"""Hyper-intervals with per-face open/closed flags.

Grid cells are half-open, explicit partitions resolve shared faces by opening
one side, and affine images keep track of which faces are attained. All of
that needs boxes whose faces may be open, so this is not a plain (lo, hi) pair.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


def _axis_nonempty(lo, hi, lc, uc):
    return lo < hi or (lo == hi and lc and uc)


@dataclass(frozen=True)
class Box:
    lower: tuple
    upper: tuple
    lower_closed: tuple = None
    upper_closed: tuple = None

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi):
            raise ValueError("lower and upper must have the same dimension")
        n = len(lo)
        lc = (True,) * n if self.lower_closed is None else tuple(bool(b) for b in self.lower_closed)
        uc = (True,) * n if self.upper_closed is None else tuple(bool(b) for b in self.upper_closed)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "lower_closed", lc)
        object.__setattr__(self, "upper_closed", uc)

    @classmethod
    def closed(cls, lower, upper) -> "Box":
        return cls(lower, upper)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def is_empty(self) -> bool:
        return not all(
            _axis_nonempty(*a) for a in zip(self.lower, self.upper, self.lower_closed, self.upper_closed)
        )

    def is_degenerate(self) -> bool:
        return any(lo >= hi for lo, hi in zip(self.lower, self.upper))

    def contains(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        for v, lo, hi, lc, uc in zip(x, self.lower, self.upper, self.lower_closed, self.upper_closed):
            if v < lo or v > hi:
                return False
            if v == lo and not lc:
                return False
            if v == hi and not uc:
                return False
        return True

    def intersect(self, other: "Box") -> "Box":
        lo, hi, lc, uc = [], [], [], []
        for k in range(self.dim):
            a_lo, b_lo = self.lower[k], other.lower[k]
            if a_lo > b_lo:
                lo.append(a_lo), lc.append(self.lower_closed[k])
            elif b_lo > a_lo:
                lo.append(b_lo), lc.append(other.lower_closed[k])
            else:
                lo.append(a_lo), lc.append(self.lower_closed[k] and other.lower_closed[k])
            a_hi, b_hi = self.upper[k], other.upper[k]
            if a_hi < b_hi:
                hi.append(a_hi), uc.append(self.upper_closed[k])
            elif b_hi < a_hi:
                hi.append(b_hi), uc.append(other.upper_closed[k])
            else:
                hi.append(a_hi), uc.append(self.upper_closed[k] and other.upper_closed[k])
        return Box(lo, hi, lc, uc)

    def intersects(self, other: "Box") -> bool:
        return not self.intersect(other).is_empty()

    def subtract(self, other: "Box") -> list:
        """Set difference as a list of pairwise disjoint boxes."""
        inter = self.intersect(other)
        if inter.is_empty():
            return [] if self.is_empty() else [self]
        pieces = []
        lo, hi = list(self.lower), list(self.upper)
        lc, uc = list(self.lower_closed), list(self.upper_closed)
        for k in range(self.dim):
            below = Box(
                lo, hi[:k] + [inter.lower[k]] + hi[k + 1:],
                lc, uc[:k] + [not inter.lower_closed[k]] + uc[k + 1:],
            )
            if not below.is_empty():
                pieces.append(below)
            above = Box(
                lo[:k] + [inter.upper[k]] + lo[k + 1:], hi,
                lc[:k] + [not inter.upper_closed[k]] + lc[k + 1:], uc,
            )
            if not above.is_empty():
                pieces.append(above)
            lo[k], hi[k] = inter.lower[k], inter.upper[k]
            lc[k], uc[k] = inter.lower_closed[k], inter.upper_closed[k]
        return pieces

    def is_covered_by(self, boxes: Iterable["Box"]) -> bool:
        residual = [] if self.is_empty() else [self]
        for b in boxes:
            residual = [p for r in residual for p in r.subtract(b)]
            if not residual:
                return True
        return not residual

    def corners(self) -> np.ndarray:
        grids = np.meshgrid(*[(lo, hi) for lo, hi in zip(self.lower, self.upper)], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # uniform draws hit an open face with probability zero
        return rng.uniform(self.lower, self.upper, size=(size, self.dim))

    def __repr__(self):
        parts = []
        for lo, hi, lc, uc in zip(self.lower, self.upper, self.lower_closed, self.upper_closed):
            parts.append(f"{'[' if lc else '('}{lo:g},{hi:g}{']' if uc else ')'}")
        return "x".join(parts)


def covered(boxes: Sequence[Box], region: Sequence[Box]) -> bool:
    """True when every box in ``boxes`` lies inside the union of ``region``."""
    return all(b.is_covered_by(region) for b in boxes)


def resolve_shared_faces(boxes: Sequence[Box]) -> list:
    """Open faces that a box shares with an earlier one so the family is disjoint.

    Raises ValueError when two boxes overlap with positive measure.
    """
    out = []
    for box in boxes:
        lc, uc = list(box.lower_closed), list(box.upper_closed)
        for prev in out:
            inter = Box(box.lower, box.upper, lc, uc).intersect(prev)
            if inter.is_empty():
                continue
            if not inter.is_degenerate():
                raise ValueError(f"boxes {prev} and {box} overlap")
            for k in range(box.dim):
                if inter.lower[k] == inter.upper[k]:
                    if box.lower[k] == inter.lower[k] and box.lower[k] < box.upper[k]:
                        lc[k] = False
                    elif box.upper[k] == inter.upper[k]:
                        uc[k] = False
                    break
        out.append(Box(box.lower, box.upper, lc, uc))
    for i, a in enumerate(out):
        for b in out[i + 1:]:
            if a.intersects(b):
                raise ValueError(f"boxes {a} and {b} still intersect after face resolution")
    return out


# spans that are an integer multiple of eta up to rounding must not gain a sliver cell
_COUNT_SLACK = 1e-9


def grid_counts(lower, upper, eta) -> tuple:
    """Cells per axis when [lower, upper] is cut into widths ``eta`` (last cell clipped)."""
    lower, upper, eta = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (lower, upper, eta))
    if np.any(eta <= 0):
        raise ValueError("grid spacing must be positive")
    if np.any(upper <= lower):
        raise ValueError("degenerate bounds: need lower < upper on every axis")
    return tuple(int(max(1, np.ceil((hi - lo) / e - _COUNT_SLACK))) for lo, hi, e in zip(lower, upper, eta))
