"""TOML configuration: [system] [spec] [grid] [inputs] [entropy] [simulate] [reference]."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .boxes import Box
from .coarsening import MODES
from .entropy_graph import WEIGHT_MODES
from .errors import ConfigError
from .system_model import ContinuousSystem, FiniteSystem, ReachSpec, input_grid, make_model


@dataclass
class SystemConfig:
    kind: str = "finite"
    states: list = field(default_factory=list)
    inputs: list = field(default_factory=list)
    transitions: list = field(default_factory=list)
    model: str = ""
    params: dict = field(default_factory=dict)
    domain: list = field(default_factory=list)


@dataclass
class SpecConfig:
    safe: list = field(default_factory=list)
    target: list = field(default_factory=list)
    allow_equal: bool = False


@dataclass
class GridConfig:
    eta_s: Any = None
    bounds: dict | None = None
    cells: list | None = None


@dataclass
class InputConfig:
    values: list | None = None
    lower: list | None = None
    upper: list | None = None
    eta: list | None = None


@dataclass
class EntropyConfig:
    weight_mode: str = "include-target"
    coarsen: str = "input"
    fallback: bool = True
    path_limit: int = 100_000


@dataclass
class SimulateConfig:
    x0: Any = None
    steps: int = 50
    seed: int = 0


@dataclass
class ReferenceConfig:
    domain_size: int | None = None
    group_count: int | None = None
    N_R: float | None = None


@dataclass
class Config:
    system: SystemConfig
    spec: SpecConfig
    grid: GridConfig = field(default_factory=GridConfig)
    inputs: InputConfig = field(default_factory=InputConfig)
    entropy: EntropyConfig = field(default_factory=EntropyConfig)
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)
    source: str = "<dict>"

    @property
    def is_finite(self) -> bool:
        return self.system.kind == "finite"

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("source")
        return out


_SECTIONS = {
    "system": SystemConfig,
    "spec": SpecConfig,
    "grid": GridConfig,
    "inputs": InputConfig,
    "entropy": EntropyConfig,
    "simulate": SimulateConfig,
    "reference": ReferenceConfig,
}


def _section(cls, data, name):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = set(cls.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"[{name}] has unknown keys {sorted(unknown)}; allowed: {sorted(known)}")
    return cls(**data)


def parse_config(data: dict, source: str = "<dict>") -> Config:
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")
    for required in ("system", "spec"):
        if required not in data:
            raise ConfigError(f"missing [{required}] section")
    parts = {name: _section(cls, data.get(name), name) for name, cls in _SECTIONS.items()}
    cfg = Config(**parts, source=source)
    if cfg.system.kind not in ("finite", "continuous"):
        raise ConfigError(f"[system] kind must be 'finite' or 'continuous', got {cfg.system.kind!r}")
    if cfg.entropy.weight_mode not in WEIGHT_MODES:
        raise ConfigError(f"[entropy] weight_mode must be one of {WEIGHT_MODES}")
    if cfg.entropy.coarsen not in MODES:
        raise ConfigError(f"[entropy] coarsen must be one of {MODES}")
    if not cfg.is_finite and cfg.grid.eta_s is None and cfg.grid.cells is None:
        raise ConfigError("continuous systems need [grid] eta_s or an explicit cells list")
    return cfg


def load_config(path) -> Config:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data, str(path))


def config_hash(cfg: Config) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True, default=repr).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _box(entry, where) -> Box:
    try:
        return Box(entry["lower"], entry["upper"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: boxes need numeric 'lower' and 'upper' ({exc})") from None


def _ident(v):
    return tuple(v) if isinstance(v, list) else v


@dataclass(frozen=True)
class Problem:
    """Objects built from a config: the system, the spec, and the input list."""

    system: Any
    spec: ReachSpec
    inputs: tuple
    cells: tuple | None = None


def build_problem(cfg: Config) -> Problem:
    s = cfg.system
    try:
        if cfg.is_finite:
            transitions = {}
            for row in s.transitions:
                if len(row) != 3:
                    raise ConfigError("finite transitions are [state, input, [successors]] triples")
                x, u, succ = row
                transitions[(_ident(x), _ident(u))] = {_ident(y) for y in succ}
            states = tuple(_ident(x) for x in s.states)
            inputs = tuple(_ident(u) for u in s.inputs)
            system = FiniteSystem(states, inputs, transitions)
            spec = ReachSpec({_ident(x) for x in cfg.spec.safe}, {_ident(x) for x in cfg.spec.target}, cfg.spec.allow_equal)
            return Problem(system, spec, inputs)
        domain = tuple(_box(b, "[system] domain") for b in s.domain)
        if not domain:
            raise ConfigError("[system] domain must list at least one box")
        system = ContinuousSystem(s.model, dict(s.params), domain, make_model(s.model, dict(s.params)))
        spec = ReachSpec(
            tuple(_box(b, "[spec] safe") for b in cfg.spec.safe),
            tuple(_box(b, "[spec] target") for b in cfg.spec.target),
            cfg.spec.allow_equal,
        )
        i = cfg.inputs
        if i.values is not None:
            inputs = tuple(tuple(float(v) for v in (u if isinstance(u, list) else [u])) for u in i.values)
        elif None not in (i.lower, i.upper, i.eta):
            inputs = input_grid(i.lower, i.upper, i.eta)
        else:
            raise ConfigError("[inputs] needs either values or lower/upper/eta")
        cells = None
        if cfg.grid.cells is not None:
            cells = tuple((str(c["name"]), _box(c, "[grid] cells")) for c in cfg.grid.cells)
        return Problem(system, spec, inputs, cells)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"{cfg.source}: {exc}") from None
