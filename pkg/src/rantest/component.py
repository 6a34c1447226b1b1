"""Uniform component interface and the kind registry.

Every scenario component kind (the RAN nodes as well as the attacks) is a
:class:`Component` subclass registered under a kind string. The config
module validates ``params`` against the class' ``PARAMS`` table, so adding
a new attack means writing one class and decorating it with
:func:`register`; nothing in the controller or simulator changes.

Lifecycle:

* ``init(ctx)`` is called exactly once per instance, from the component's
  worker thread. Raise :class:`ComponentError` to reject the parameters.
* ``on_slot(ctx)`` is called from the simulation thread once per slot,
  after the slot's radio procedures ran. The component observes the slot
  and emits commands that the simulator applies at the start of the next
  slot. An instance activated at slot boundary ``s`` first receives a blank
  context for slot ``s - 1`` so it can prepare slot ``s``.
* ``stop()`` may be called any number of times.

A component touches the simulation only through ``ctx.commands``.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable, ClassVar

if TYPE_CHECKING:
    from .config import ComponentSpec
    from .ransim.commands import CommandPort
    from .ransim.sim import Environment, SlotContext


class ComponentError(Exception):
    """Raised by ``init`` when a component cannot run with its parameters."""


class ComponentFailure(Exception):
    """Raised by ``on_slot`` when a running component has failed."""


@dataclass(frozen=True)
class Param:
    type: str  # "int" | "float" | "str" | "bool"
    required: bool = False
    default: Any = None
    minimum: float | None = None
    ref_kind: str | None = None  # value must name a component of this kind


class _NullSession:
    def write(self, measurement, fields, ts_slot, tags=None):
        pass


def _null_log(level, message, slot=None):
    pass


@dataclass
class InitContext:
    name: str
    spec: "ComponentSpec"
    seed: int
    commands: "CommandPort"
    env: "Environment"
    metrics: Any = field(default_factory=_NullSession)
    log: Callable[..., None] = _null_log

    @property
    def params(self) -> dict[str, Any]:
        return self.spec.params


class Component:
    kind: ClassVar[str] = ""
    PARAMS: ClassVar[dict[str, Param]] = {}
    POSITION_REQUIRED: ClassVar[bool] = False
    # Passive components never emit commands.
    PASSIVE: ClassVar[bool] = False

    def __init__(self) -> None:
        self.name = ""
        self.rng = random.Random(0)
        self.commands: CommandPort | None = None
        self.metrics: Any = _NullSession()
        self.log: Callable[..., None] = _null_log
        self.stopped = False
        self._initialized = False

    def init(self, ctx: InitContext) -> None:
        if self._initialized:
            raise RuntimeError(f"{ctx.name}: init called twice")
        self._initialized = True
        self.name = ctx.name
        self.spec = ctx.spec
        self.params = dict(ctx.spec.params)
        self.rng = random.Random(ctx.seed)
        self.commands = ctx.commands
        self.metrics = ctx.metrics
        self.log = ctx.log
        self.env = ctx.env
        self.setup()

    def setup(self) -> None:
        """Kind-specific parameter checks and state; raise ComponentError."""

    def on_slot(self, ctx: "SlotContext") -> None:
        if not self._initialized:
            raise RuntimeError(f"{self.name or self.kind}: on_slot before init")
        if not ctx.blank:
            self.observe(ctx)
        self.prepare(ctx.slot + 1)

    def observe(self, ctx: "SlotContext") -> None:
        pass

    def prepare(self, slot: int) -> None:
        pass

    def stop(self) -> None:
        self.stopped = True

    def artifacts(self) -> dict[str, str]:
        """Files to persist in the run directory, name -> text."""
        return {}

    def emit(self, command) -> None:
        self.commands.emit(command)


REGISTRY: dict[str, type[Component]] = {}


def register(kind: str):
    def deco(cls: type[Component]) -> type[Component]:
        if kind in REGISTRY and REGISTRY[kind] is not cls:
            raise ValueError(f"component kind {kind!r} already registered")
        cls.kind = kind
        REGISTRY[kind] = cls
        return cls

    return deco


def component_class(kind: str) -> type[Component]:
    _load_builtins()
    return REGISTRY[kind]


def known_kinds() -> list[str]:
    _load_builtins()
    return sorted(REGISTRY)


def _load_builtins() -> None:
    # Registration happens on import of the implementation modules.
    from . import attacks  # noqa: F401
    from .ransim import nodes  # noqa: F401
