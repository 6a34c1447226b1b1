"""Scenario documents: parsing, validation, execution planning.

A scenario is a YAML mapping with three sections::

    scenario:   {id, seed, duration_slots, slot_us=1000, realtime=false}
    channel:    {pl0_db=40.0, d0_m=1.0, exponent=2.7, noise_dbm=-94.0}
    components:
      - {name, kind, depends_on=[], position_m=None, params={...}}

Validation collects every problem before reporting, and each diagnostic
names the key path it refers to (``components[2].params.gain_db``).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import yaml

from .component import Param, component_class, known_kinds

U64_MAX = 2**64 - 1
U32_MAX = 2**32 - 1

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3


@dataclass(frozen=True)
class Diagnostic:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


class ScenarioError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


class PlanError(ScenarioError):
    def __init__(self, cycle: list[str]):
        self.cycle = list(cycle)
        path = " -> ".join(cycle + cycle[:1])
        super().__init__([Diagnostic("components", f"dependency cycle: {path}")])


@dataclass(frozen=True)
class ChannelSpec:
    pl0_db: float = 40.0
    d0_m: float = 1.0
    exponent: float = 2.7
    noise_dbm: float = -94.0


@dataclass(frozen=True)
class ComponentSpec:
    name: str
    kind: str
    depends_on: tuple[str, ...] = ()
    params: dict[str, Any] = field(default_factory=dict)
    position_m: float | None = None


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    seed: int
    duration_slots: int
    channel: ChannelSpec = ChannelSpec()
    components: tuple[ComponentSpec, ...] = ()
    slot_us: int = 1000
    realtime: bool = False

    def component(self, name: str) -> ComponentSpec:
        for c in self.components:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.components]


@dataclass(frozen=True)
class ExecutionPlan:
    stages: tuple[tuple[str, ...], ...]
    spec: ScenarioSpec

    def stage_of(self, name: str) -> int:
        for k, stage in enumerate(self.stages):
            if name in stage:
                return k
        raise KeyError(name)


# -- seeds -------------------------------------------------------------------

def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV64_PRIME) & U64_MAX
    return h


def derive_component_seed(scenario_seed: int, name: str) -> int:
    """FNV-1a 64 over the 8-byte big-endian seed followed by UTF-8 ``name``."""
    return fnv1a_64(scenario_seed.to_bytes(8, "big") + name.encode("utf-8"))


# -- validation ----------------------------------------------------------------

def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_number(v: Any) -> bool:
    return (_is_int(v) or isinstance(v, float)) and math.isfinite(v)


_TYPE_CHECKS = {
    "int": _is_int,
    "float": _is_number,
    "str": lambda v: isinstance(v, str),
    "bool": lambda v: isinstance(v, bool),
}

_SCENARIO_KEYS = {
    "id": Param("str", required=True),
    "seed": Param("int", required=True, minimum=0),
    "duration_slots": Param("int", required=True, minimum=1),
    "slot_us": Param("int", default=1000, minimum=1),
    "realtime": Param("bool", default=False),
}
_CHANNEL_KEYS = {
    "pl0_db": Param("float", default=40.0),
    "d0_m": Param("float", default=1.0),
    "exponent": Param("float", default=2.7),
    "noise_dbm": Param("float", default=-94.0),
}
_COMPONENT_KEYS = ("name", "kind", "depends_on", "params", "position_m")


class _Collector:
    def __init__(self) -> None:
        self.diagnostics: list[Diagnostic] = []

    def add(self, path: str, message: str) -> None:
        self.diagnostics.append(Diagnostic(path, message))


def _check_value(diag: _Collector, path: str, value: Any, param: Param) -> Any:
    if not _TYPE_CHECKS[param.type](value):
        diag.add(path, f"expected {param.type}, got {type(value).__name__}")
        return None
    if param.type == "float":
        value = float(value)
    if param.minimum is not None and value < param.minimum:
        diag.add(path, f"must be >= {param.minimum:g}, got {value!r}")
        return None
    return value


def _check_section(diag: _Collector, path: str, raw: Any, table: dict[str, Param]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        diag.add(path, f"expected mapping, got {type(raw).__name__}")
        return out
    for key in raw:
        if key not in table:
            diag.add(f"{path}.{key}", "unknown key")
    for key, param in table.items():
        if key in raw:
            value = _check_value(diag, f"{path}.{key}", raw[key], param)
            if value is not None:
                out[key] = value
        elif param.required:
            diag.add(f"{path}.{key}", "missing required key")
        else:
            out[key] = param.default
    return out


def _check_component(diag: _Collector, i: int, raw: Any, kinds: list[str]) -> dict[str, Any] | None:
    path = f"components[{i}]"
    if not isinstance(raw, dict):
        diag.add(path, f"expected mapping, got {type(raw).__name__}")
        return None
    for key in raw:
        if key not in _COMPONENT_KEYS:
            diag.add(f"{path}.{key}", "unknown key")
    out: dict[str, Any] = {}
    name = raw.get("name")
    if "name" not in raw:
        diag.add(f"{path}.name", "missing required key")
    elif not isinstance(name, str) or not name:
        diag.add(f"{path}.name", "expected nonempty string")
    else:
        out["name"] = name

    kind = raw.get("kind")
    cls = None
    if "kind" not in raw:
        diag.add(f"{path}.kind", "missing required key")
    elif not isinstance(kind, str) or kind not in kinds:
        diag.add(f"{path}.kind", f"unknown kind {kind!r} (expected one of {', '.join(kinds)})")
    else:
        out["kind"] = kind
        cls = component_class(kind)

    deps = raw.get("depends_on", [])
    if deps is None:
        deps = []
    if not isinstance(deps, list):
        diag.add(f"{path}.depends_on", f"expected list, got {type(deps).__name__}")
    else:
        good = []
        for j, d in enumerate(deps):
            if not isinstance(d, str) or not d:
                diag.add(f"{path}.depends_on[{j}]", "expected component name")
            elif d in good:
                diag.add(f"{path}.depends_on[{j}]", f"duplicate dependency {d!r}")
            else:
                good.append(d)
        out["depends_on"] = tuple(good)

    if "position_m" in raw and raw["position_m"] is not None:
        pos = _check_value(diag, f"{path}.position_m", raw["position_m"], Param("float", minimum=0.0))
        if pos is not None:
            out["position_m"] = pos
    elif cls is not None and cls.POSITION_REQUIRED:
        diag.add(f"{path}.position_m", f"missing required key for kind {kind!r}")

    if cls is not None:
        out["params"] = _check_section(diag, f"{path}.params", raw.get("params"), cls.PARAMS)
        out["_refs"] = {k: p.ref_kind for k, p in cls.PARAMS.items() if p.ref_kind}
    elif raw.get("params") is not None and not isinstance(raw.get("params"), dict):
        diag.add(f"{path}.params", "expected mapping")
    return out


def validate_document(doc: Any) -> ScenarioSpec:
    """Validate an already-loaded document; raise ScenarioError with all problems."""
    diag = _Collector()
    kinds = known_kinds()
    if not isinstance(doc, dict):
        raise ScenarioError([Diagnostic("<document>", "top level must be a mapping")])
    for key in doc:
        if key not in ("scenario", "channel", "components"):
            diag.add(str(key), "unknown key")
    if "scenario" not in doc:
        diag.add("scenario", "missing required key")
    scen = _check_section(diag, "scenario", doc.get("scenario"), _SCENARIO_KEYS)
    if "id" in scen and not scen["id"]:
        diag.add("scenario.id", "must be nonempty")
    if "seed" in scen and scen["seed"] > U64_MAX:
        diag.add("scenario.seed", "must fit in 64 bits")
    for key in ("duration_slots", "slot_us"):
        if key in scen and scen[key] > U32_MAX:
            diag.add(f"scenario.{key}", "must fit in 32 bits")
    chan = _check_section(diag, "channel", doc.get("channel"), _CHANNEL_KEYS)
    for key in ("d0_m", "exponent"):
        if key in chan and chan[key] <= 0:
            diag.add(f"channel.{key}", "must be > 0")

    raw_components = doc.get("components")
    comps: list[dict[str, Any]] = []
    if "components" not in doc:
        diag.add("components", "missing required key")
    elif not isinstance(raw_components, list) or not raw_components:
        diag.add("components", "expected nonempty list")
    else:
        for i, raw in enumerate(raw_components):
            comps.append(_check_component(diag, i, raw, kinds) or {})

    seen: dict[str, int] = {}
    for i, c in enumerate(comps):
        name = c.get("name")
        if name is None:
            continue
        if name in seen:
            diag.add(f"components[{i}].name", f"duplicate name {name!r} (first at components[{seen[name]}])")
        else:
            seen[name] = i
    kind_of = {c["name"]: c.get("kind") for c in comps if "name" in c}
    for i, c in enumerate(comps):
        for j, d in enumerate(c.get("depends_on", ())):
            if d == c.get("name"):
                diag.add(f"components[{i}].depends_on[{j}]", "component depends on itself")
            elif d not in kind_of:
                diag.add(f"components[{i}].depends_on[{j}]", f"unknown component {d!r}")
        for key, ref_kind in c.get("_refs", {}).items():
            target = c.get("params", {}).get(key)
            if target is None:
                continue
            if target not in kind_of:
                diag.add(f"components[{i}].params.{key}", f"dangling reference: no component named {target!r}")
            elif kind_of[target] != ref_kind:
                diag.add(f"components[{i}].params.{key}", f"{target!r} is a {kind_of[target]}, expected {ref_kind}")
    gnbs = [n for n, k in kind_of.items() if k == "gnb"]
    if comps and len(gnbs) != 1:
        diag.add("components", f"exactly one gnb component required, found {len(gnbs)}")

    if diag.diagnostics:
        raise ScenarioError(diag.diagnostics)
    return ScenarioSpec(
        id=scen["id"],
        seed=scen["seed"],
        duration_slots=scen["duration_slots"],
        slot_us=scen["slot_us"],
        realtime=scen["realtime"],
        channel=ChannelSpec(**chan),
        components=tuple(
            ComponentSpec(
                name=c["name"],
                kind=c["kind"],
                depends_on=c["depends_on"],
                params=c["params"],
                position_m=c.get("position_m"),
            )
            for c in comps
        ),
    )


def parse_scenario(text: str) -> ScenarioSpec:
    """Parse and validate a scenario document.

    Raises ScenarioError carrying every diagnostic found; YAML syntax errors
    are reported with their line and column.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ScenarioError([Diagnostic("<document>", f"syntax error at {where}: {exc.problem}")]) from None
    except yaml.YAMLError as exc:
        raise ScenarioError([Diagnostic("<document>", f"syntax error: {exc}")]) from None
    return validate_document(doc)


def load_scenario(path) -> ScenarioSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def scenario_to_dict(spec: ScenarioSpec) -> dict[str, Any]:
    components = []
    for c in spec.components:
        item: dict[str, Any] = {"name": c.name, "kind": c.kind, "depends_on": list(c.depends_on)}
        if c.position_m is not None:
            item["position_m"] = c.position_m
        item["params"] = dict(c.params)
        components.append(item)
    return {
        "scenario": {
            "id": spec.id,
            "seed": spec.seed,
            "duration_slots": spec.duration_slots,
            "slot_us": spec.slot_us,
            "realtime": spec.realtime,
        },
        "channel": asdict(spec.channel),
        "components": components,
    }


def dump_scenario(spec: ScenarioSpec) -> str:
    return yaml.safe_dump(scenario_to_dict(spec), sort_keys=False)


def apply_defaults(spec: ScenarioSpec) -> ScenarioSpec:
    """Re-validate through the schema; a no-op on a validated spec."""
    return validate_document(scenario_to_dict(spec))


def with_overrides(spec: ScenarioSpec, seed: int | None = None, duration_slots: int | None = None) -> ScenarioSpec:
    changes: dict[str, Any] = {}
    if seed is not None:
        changes["seed"] = seed
    if duration_slots is not None:
        changes["duration_slots"] = duration_slots
    return validate_document(scenario_to_dict(replace(spec, **changes)))


# -- planning ------------------------------------------------------------------

def _find_cycle(remaining: list[str], deps: dict[str, tuple[str, ...]]) -> list[str]:
    pending = set(remaining)
    order = {n: i for i, n in enumerate(remaining)}
    node = remaining[0]
    path: list[str] = []
    index: dict[str, int] = {}
    while node not in index:
        index[node] = len(path)
        path.append(node)
        node = next(d for d in deps[node] if d in pending)
    cycle = path[index[node]:]
    start = min(range(len(cycle)), key=lambda k: order[cycle[k]])
    return cycle[start:] + cycle[:start]


def build_plan(spec: ScenarioSpec) -> ExecutionPlan:
    """Layer components into startup stages.

    Stage k holds every component whose dependencies all sit in stages < k,
    in declaration order. Raises PlanError naming the cycle if there is one.
    """
    deps = {c.name: tuple(c.depends_on) for c in spec.components}
    placed: set[str] = set()
    remaining = spec.names
    stages = []
    while remaining:
        stage = [n for n in remaining if all(d in placed for d in deps[n])]
        if not stage:
            raise PlanError(_find_cycle(remaining, deps))
        stages.append(tuple(stage))
        placed.update(stage)
        remaining = [n for n in remaining if n not in placed]
    return ExecutionPlan(stages=tuple(stages), spec=spec)
