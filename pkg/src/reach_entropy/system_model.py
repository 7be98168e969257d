"""Finite transition systems, continuous-space models, and the three worked examples."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Any, Mapping, Sequence

import numpy as np

from .boxes import Box, covered, grid_counts
from .errors import AbstractionSoundnessError, ConfigError, DomainError


class _Target:
    """The target set T used as a cover element / final sequence element."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "T"

    def __reduce__(self):
        return (_Target, ())


TARGET = _Target()


@dataclass(frozen=True, eq=False)
class FiniteSystem:
    """Explicit system (X, U, F) with a set-valued transition map.

    ``transitions`` maps ``(state, input)`` to an iterable of successor states;
    missing pairs are blocking (empty successor set).
    """

    states: tuple
    inputs: tuple
    transitions: Mapping = field(default_factory=dict)

    def __post_init__(self):
        states = tuple(self.states)
        inputs = tuple(self.inputs)
        if len(set(states)) != len(states) or len(set(inputs)) != len(inputs):
            raise ValueError("duplicate state or input identifiers")
        sset, uset = set(states), set(inputs)
        table = {}
        for (x, u), succ in self.transitions.items():
            succ = frozenset(succ)
            if x not in sset or u not in uset or not succ <= sset:
                raise ValueError(f"transition {(x, u)} -> {set(succ)} references undeclared identifiers")
            if succ:
                table[(x, u)] = succ
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "transitions", MappingProxyType(table))

    @cached_property
    def state_set(self) -> frozenset:
        return frozenset(self.states)

    @cached_property
    def input_set(self) -> frozenset:
        return frozenset(self.inputs)

    @cached_property
    def state_index(self) -> dict:
        return {x: i for i, x in enumerate(self.states)}

    def post(self, state, u) -> frozenset:
        if state not in self.state_set:
            raise DomainError(f"unknown state {state!r}")
        if u not in self.input_set:
            raise DomainError(f"unknown input {u!r}")
        return self.transitions.get((state, u), frozenset())

    def post_set(self, states, u) -> frozenset:
        out = set()
        for x in states:
            out |= self.post(x, u)
        return frozenset(out)

    def outgoing(self, state) -> list:
        """Non-blocking ``(input, successors)`` pairs in declared input order."""
        return [(u, self.transitions[(state, u)]) for u in self.inputs if (state, u) in self.transitions]

    def choices(self, state) -> list:
        """Like :meth:`outgoing` but keeps only the first input of each distinct successor set."""
        seen, out = set(), []
        for u, succ in self.outgoing(state):
            if succ not in seen:
                seen.add(succ)
                out.append((u, succ))
        return out

    @property
    def transition_count(self) -> int:
        return sum(len(s) for s in self.transitions.values())


@dataclass(frozen=True)
class Trajectory:
    states: tuple
    inputs: tuple

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if len(self.inputs) != len(self.states) - 1:
            raise ValueError("a trajectory needs exactly one input per step")

    def is_valid(self, system: FiniteSystem) -> bool:
        return all(
            nxt in system.post(x, u) for x, u, nxt in zip(self.states, self.inputs, self.states[1:])
        )

    def exits(self, safe) -> int | None:
        """Index of the first state outside ``safe``, or None."""
        for k, x in enumerate(self.states):
            if x not in safe:
                return k
        return None


# ---------------------------------------------------------------------------
# continuous-space models


@dataclass(frozen=True, eq=False)
class Affine:
    """x' = A x + B u + c. Interval images are exact, including open faces."""

    A: Any
    B: Any
    c: Any = None
    name = "affine"
    monotone = False

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        B = B.reshape(A.shape[0], -1)
        c = np.zeros(A.shape[0]) if self.c is None else np.atleast_1d(np.asarray(self.c, dtype=float))
        if A.shape[0] != A.shape[1] or c.shape != (A.shape[0],):
            raise ConfigError("affine model needs square A and c of matching size")
        for k, v in (("A", A), ("B", B), ("c", c)):
            v.setflags(write=False)
            object.__setattr__(self, k, v)

    @property
    def dimension(self) -> int:
        return self.A.shape[0]

    @property
    def input_dimension(self) -> int:
        return self.B.shape[1]

    def __call__(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return x @ self.A.T + u @ self.B.T + self.c

    def check_inputs(self, inputs) -> None:
        pass

    def image_bounds(self, lower, upper, inputs):
        """Closed interval hull of the image for each row of ``inputs``; shapes (k, n)."""
        lower, upper = np.asarray(lower, dtype=float), np.asarray(upper, dtype=float)
        pos, neg = np.maximum(self.A, 0.0), np.minimum(self.A, 0.0)
        shift = np.asarray(inputs, dtype=float) @ self.B.T + self.c
        lo = pos @ lower + neg @ upper
        hi = pos @ upper + neg @ lower
        return lo + shift, hi + shift

    def image(self, box: Box, u) -> Box:
        lo, hi = self.image_bounds(box.lower, box.upper, np.atleast_2d(u))
        lc, uc = [], []
        for i in range(self.dimension):
            lo_ok, hi_ok = True, True
            for j in range(box.dim):
                a = self.A[i, j]
                if a > 0:
                    lo_ok &= box.lower_closed[j]
                    hi_ok &= box.upper_closed[j]
                elif a < 0:
                    lo_ok &= box.upper_closed[j]
                    hi_ok &= box.lower_closed[j]
            lc.append(lo_ok)
            uc.append(hi_ok)
        return Box(lo[0], hi[0], lc, uc)


class ScalarLinear(Affine):
    name = "scalar_linear"


def scalar_linear(a: float = 0.5, b: float = 1.0) -> Affine:
    return ScalarLinear([[a]], [[b]], [0.0])


def eval_scalar_linear(x: float, u: float) -> float:
    return 0.5 * x + u


@dataclass(frozen=True)
class RoomTemperature:
    """Heated rooms on a ring; room i exchanges heat with rooms i-1 and i+1."""

    alpha: float
    beta: float
    gamma: float
    t_e: float
    t_h: float
    u_min: float = 0.0
    u_max: float = 0.6
    n_rooms: int = 3
    name = "room_temperature"
    monotone = True

    @property
    def dimension(self) -> int:
        return self.n_rooms

    @property
    def input_dimension(self) -> int:
        return self.n_rooms

    def __call__(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        neighbours = np.roll(x, 1, axis=-1) + np.roll(x, -1, axis=-1)
        return (
            x
            + self.alpha * (neighbours - 2 * x)
            + self.beta * (self.t_e - x)
            + self.gamma * (self.t_h - x) * u
        )

    def self_coefficient(self, u):
        """dF_i/dT_i; must stay nonnegative for corner images to be exact."""
        ring = 0.0 if self.n_rooms > 1 else 2 * self.alpha
        return 1 - 2 * self.alpha + ring - self.beta - self.gamma * np.asarray(u, dtype=float)

    def check_inputs(self, inputs) -> None:
        u = np.asarray(inputs, dtype=float)
        if u.size == 0:
            return
        if self.alpha < 0 or np.any(self.self_coefficient(u.max(axis=0)) < 0):
            raise AbstractionSoundnessError(
                "room model is not coordinatewise monotone for the given inputs "
                "(need 1 - 2*alpha - beta - gamma*u >= 0 and alpha >= 0)"
            )

    def image_bounds(self, lower, upper, inputs):
        u = np.asarray(inputs, dtype=float)
        return self(np.asarray(lower, dtype=float), u), self(np.asarray(upper, dtype=float), u)

    def image(self, box: Box, u) -> Box:
        self.check_inputs(np.atleast_2d(u))
        lo, hi = self.image_bounds(box.lower, box.upper, np.atleast_2d(u))
        return Box(lo[0], hi[0])


def eval_room_dynamics(temps, u, params: Mapping) -> np.ndarray:
    model = RoomTemperature(**params)
    u = np.asarray(u, dtype=float)
    if np.any(u < model.u_min) or np.any(u > model.u_max):
        raise DomainError(f"heater input {u} outside [{model.u_min}, {model.u_max}]")
    return model(temps, u)


ROOM_PARAMS = {"alpha": 0.45, "beta": 0.045, "gamma": 0.09, "t_e": -1.0, "t_h": 50.0}

_SCHEMAS = {
    "room_temperature": ({"alpha", "beta", "gamma", "t_e", "t_h"}, {"u_min", "u_max", "n_rooms"}),
    "scalar_linear": (set(), {"a", "b"}),
    "affine": ({"A", "B"}, {"c"}),
}


def make_model(name: str, params: Mapping):
    """Instantiate a registered model; the parameter record must match its schema."""
    if name not in _SCHEMAS:
        raise ConfigError(f"unknown model {name!r}; known: {sorted(_SCHEMAS)}")
    required, optional = _SCHEMAS[name]
    keys = set(params)
    if not required <= keys or not keys <= required | optional:
        raise ConfigError(
            f"parameters for {name!r} must be {sorted(required)} plus optional {sorted(optional)}, got {sorted(keys)}"
        )
    if name == "room_temperature":
        return RoomTemperature(**params)
    if name == "scalar_linear":
        return scalar_linear(**params)
    return Affine(**params)


@dataclass(frozen=True)
class ContinuousSystem:
    model_name: str
    params: Mapping
    state_domain: tuple
    model: Any = field(default=None, compare=False)

    def __post_init__(self):
        model = self.model or make_model(self.model_name, dict(self.params))
        domain = tuple(self.state_domain)
        for b in domain:
            if b.dim != model.dimension:
                raise ConfigError("state domain dimension does not match the model")
            if any(lo >= hi for lo, hi in zip(b.lower, b.upper)):
                raise ConfigError(f"degenerate state-domain box {b}")
        object.__setattr__(self, "model", model)
        object.__setattr__(self, "state_domain", domain)
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    @property
    def dimension(self) -> int:
        return self.model.dimension

    @property
    def input_dimension(self) -> int:
        return self.model.input_dimension

    def step(self, x, u):
        return self.model(x, u)


@dataclass(frozen=True)
class ReachSpec:
    """Safe set Q and target T ⊆ Q.

    For finite systems both are state sets; for continuous systems both are
    tuples of boxes. ``allow_equal`` flags the degenerate case T = Q.
    """

    safe: Any
    target: Any
    allow_equal: bool = False

    def __post_init__(self):
        if _is_box_family(self.safe):
            safe, target = tuple(self.safe), tuple(self.target)
            if not covered(target, safe):
                raise ValueError("target set must lie inside the safe set")
            if not self.allow_equal and covered(safe, target):
                raise ValueError("target equals safe set; pass allow_equal=True for this degenerate case")
        else:
            safe, target = frozenset(self.safe), frozenset(self.target)
            if not target <= safe:
                raise ValueError("target set must lie inside the safe set")
            if target == safe and not self.allow_equal:
                raise ValueError("target equals safe set; pass allow_equal=True for this degenerate case")
        object.__setattr__(self, "safe", safe)
        object.__setattr__(self, "target", target)

    @property
    def is_finite(self) -> bool:
        return isinstance(self.safe, frozenset)

    @property
    def remainder(self) -> frozenset:
        """Q \\ T for finite specs."""
        return self.safe - self.target


def _is_box_family(obj) -> bool:
    try:
        items = list(obj)
    except TypeError:
        return False
    return bool(items) and all(isinstance(b, Box) for b in items)


def input_grid(lower, upper, eta) -> tuple:
    """Centres of the input grid cells, first coordinate varying slowest."""
    lower, upper, eta = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (lower, upper, eta))
    axes = []
    for lo, hi, e, n in zip(lower, upper, eta, grid_counts(lower, upper, eta)):
        left = lo + e * np.arange(n)
        right = np.minimum(left + e, hi)
        axes.append([float(v) for v in (left + right) / 2])
    return tuple(itertools.product(*axes))


# ---------------------------------------------------------------------------
# the worked examples


def example1_system() -> tuple:
    """Four states, inputs a/b; 0 -a-> 1, 2 -b-> 1, and the other inputs leave Q via 3."""
    system = FiniteSystem(
        states=(0, 1, 2, 3),
        inputs=("a", "b"),
        transitions={(0, "a"): {1}, (0, "b"): {3}, (2, "b"): {1}, (2, "a"): {3}},
    )
    return system, ReachSpec(safe={0, 1, 2}, target={1})


EXAMPLE2_CELLS = (
    ("T", Box([0.0], [1.4])),
    ("A2", Box([2.0], [3.75])),
    ("A1", Box([3.75], [6.0])),
)


def example2_system() -> tuple:
    """Scalar x' = 0.5x + u with Q = [0,1.4] ∪ [2,6], T = [0,1.4], U = {-0.5, 0.75}."""
    system = ContinuousSystem("scalar_linear", {"a": 0.5, "b": 1.0}, (Box([0.0], [6.0]),))
    spec = ReachSpec(safe=(Box([0.0], [1.4]), Box([2.0], [6.0])), target=(Box([0.0], [1.4]),))
    inputs = ((-0.5,), (0.75,))
    return system, spec, inputs


def room_temperature_system() -> tuple:
    """Three-room ring with the conduction factors and set-points of the heating example."""
    q = Box([17.4] * 3, [24.0] * 3)
    system = ContinuousSystem("room_temperature", dict(ROOM_PARAMS), (q,))
    spec = ReachSpec(safe=(q,), target=(Box([22.0] * 3, [24.0] * 3),))
    inputs = input_grid([0.0] * 3, [0.6] * 3, [0.01] * 3)
    return system, spec, inputs


def sequence_inputs(inputs: Sequence) -> tuple:
    """Normalise an input list to tuples of floats (scalars become 1-tuples)."""
    out = []
    for u in inputs:
        out.append(tuple(float(v) for v in np.atleast_1d(u)))
    return tuple(out)


def ordered(items) -> list:
    """Sorted when the items are mutually comparable, else sorted by repr."""
    items = list(items)
    try:
        return sorted(items)
    except TypeError:
        return sorted(items, key=repr)
