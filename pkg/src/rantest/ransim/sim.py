"""Discrete-slot RAN simulation.

One thread owns a :class:`Simulation` and calls :meth:`advance_slot`. Each
slot runs, in order:

1. apply commands queued by active components during the previous slot
2. RACH occasion (when ``slot % rach_period_slots == 0``)
3. RRC delivery and processing
4. PDCCH scheduling
5. link budgets, SINR and radio link monitoring
6. component ``on_slot`` calls, which emit metrics and next-slot commands

Component activation and deactivation requests may arrive from other
threads; they are queued and applied at the next slot boundary. Every
state-changing event is folded into a SHA-256 digest so two runs can be
compared byte for byte.
"""
from __future__ import annotations

import hashlib
import json
import queue
import random
from dataclasses import dataclass, field, fields
from typing import Any, Callable

from ..config import ChannelSpec, ScenarioSpec, derive_component_seed
from .channel import LinkBudget, path_loss
from .commands import CommandPort, SendPreamble, StartInterference, StopInterference, SubmitRrc
from .pdcch import DciRecord, schedule_pdcch
from .rach import COLLISION, GRANTED, GnbParams, GnbState, RachOutcome, RachPreamble, UeContext, rach_occasion
from .rlf import RELEASED, RadioLinkMonitor
from .rrc import RrcReject, decode_setup_request

DEFAULT_UE_TX_DBM = 20.0


@dataclass(frozen=True)
class Environment:
    """Static, read-only facts about the simulated network."""

    channel: ChannelSpec
    gnb: GnbParams
    gnb_name: str
    positions: dict[str, float | None]
    duration_slots: int

    @classmethod
    def from_spec(cls, spec: ScenarioSpec) -> "Environment":
        gnb = next(c for c in spec.components if c.kind == "gnb")
        names = {f.name for f in fields(GnbParams)}
        params = GnbParams(**{k: v for k, v in gnb.params.items() if k in names})
        return cls(
            channel=spec.channel,
            gnb=params,
            gnb_name=gnb.name,
            positions={c.name: c.position_m for c in spec.components},
            duration_slots=spec.duration_slots,
        )

    def is_rach_occasion(self, slot: int) -> bool:
        return slot % self.gnb.rach_period_slots == 0


@dataclass(frozen=True)
class RrcResult:
    accepted: bool
    reason: str | None = None
    rnti: int | None = None
    connected: bool = False
    blocked: bool = False


@dataclass(frozen=True)
class Release:
    source: str
    rnti: int
    reason: str
    sinr_db: float | None = None


@dataclass(frozen=True)
class Emitter:
    source: str
    tx_power_dbm: float
    position_m: float


@dataclass
class SlotContext:
    slot: int
    env: Environment
    blank: bool = False
    gnb_up: bool = False
    gnb_crashed: str | None = None
    rach: dict[str, list[tuple[int, RachOutcome]]] = field(default_factory=dict)
    rrc: dict[str, list[RrcResult]] = field(default_factory=dict)
    dcis: list[DciRecord] = field(default_factory=list)
    links: dict[str, LinkBudget] = field(default_factory=dict)
    released: list[Release] = field(default_factory=list)
    blocked: list[str] = field(default_factory=list)
    connected: dict[str, int] = field(default_factory=dict)
    emitters: list[Emitter] = field(default_factory=list)
    pending_contention: int = 0


@dataclass
class _Active:
    component: Any
    port: CommandPort


class Simulation:
    def __init__(
        self,
        spec: ScenarioSpec,
        on_failure: Callable[[str, str, int], None] | None = None,
        trace=None,
    ):
        self.spec = spec
        self.env = Environment.from_spec(spec)
        self.order = spec.names
        self._rank = {n: i for i, n in enumerate(self.order)}
        self.slot = 0
        self.active: dict[str, _Active] = {}
        self.on_failure = on_failure
        self.trace = trace
        self._digest = hashlib.sha256()
        self.event_count = 0
        self._inbox: queue.SimpleQueue = queue.SimpleQueue()
        self._faults: dict[int, list[tuple[str, str]]] = {}
        self._preambles: list[tuple[str, int]] = []
        self._rrc: list[tuple[str, SubmitRrc]] = []
        self._interferers: dict[str, StartInterference] = {}
        self._gnb_generation = 0
        self.gnb = GnbState(self.env.gnb)
        self.gnb.crash("not started")
        self.failures: list[tuple[str, str, int]] = []

    # -- lifecycle (thread-safe requests) --------------------------------

    def activate(self, name: str, component, port: CommandPort) -> None:
        self._inbox.put(("activate", name, component, port))

    def deactivate(self, name: str, reason: str = "deactivated") -> None:
        self._inbox.put(("deactivate", name, reason))

    def schedule_fault(self, name: str, slot: int, reason: str = "injected fault") -> None:
        self._faults.setdefault(slot, []).append((name, reason))

    @property
    def digest(self) -> str:
        return self._digest.hexdigest()

    @property
    def gnb_up(self) -> bool:
        return self.env.gnb_name in self.active and not self.gnb.failed

    # -- internals ---------------------------------------------------------

    def _event(self, *payload) -> None:
        line = json.dumps(payload, separators=(",", ":"))
        self._digest.update(line.encode())
        self._digest.update(b"\n")
        self.event_count += 1
        if self.trace is not None:
            self.trace.write(line + "\n")

    def _reset_gnb(self) -> None:
        seed = derive_component_seed(self.spec.seed, f"{self.env.gnb_name}@radio#{self._gnb_generation}")
        self._gnb_generation += 1
        self.gnb = GnbState(self.env.gnb)
        rng = random.Random(seed)
        self.rach_rng = random.Random(rng.getrandbits(64))
        self.pdcch_rng = random.Random(rng.getrandbits(64))

    def _release(self, ctx: SlotContext, rnti: int, reason: str, sinr_db: float | None = None) -> None:
        ue = self.gnb.connections.pop(rnti)
        ctx.released.append(Release(ue.source, rnti, reason, sinr_db))
        self._event("release", ctx.slot, ue.source, rnti, reason)

    def _gnb_down(self, ctx: SlotContext, reason: str) -> None:
        if not self.gnb.failed:
            self.gnb.crash(reason)
        self._event("gnb_failed", ctx.slot, reason)
        for rnti in sorted(self.gnb.connections):
            self._release(ctx, rnti, "gnb_failure")
        self.gnb.pending_contention.clear()

    def _drop(self, ctx: SlotContext, name: str) -> None:
        self.active.pop(name, None)
        if name in self._interferers:
            del self._interferers[name]
            self._event("interference_off", ctx.slot, name)
        if name == self.env.gnb_name and not self.gnb.failed:
            self._gnb_down(ctx, "gnb stopped")
        for rnti, ue in sorted(self.gnb.connections.items()):
            if ue.source == name:
                self._release(ctx, rnti, "ue_detached")

    def _fail(self, ctx: SlotContext, name: str, reason: str) -> None:
        if name not in self.active:
            return
        self._drop(ctx, name)
        self.failures.append((name, reason, ctx.slot))
        if self.on_failure is not None:
            self.on_failure(name, reason, ctx.slot)

    def _boundary(self, ctx: SlotContext) -> list[str]:
        fresh = []
        while True:
            try:
                msg = self._inbox.get_nowait()
            except queue.Empty:
                break
            if msg[0] == "activate":
                _, name, component, port = msg
                if name == self.env.gnb_name and self.gnb.failed:
                    self._reset_gnb()
                self.active[name] = _Active(component, port)
                fresh.append(name)
            else:
                _, name, reason = msg
                if name in self.active:
                    self._drop(ctx, name)
                fresh = [n for n in fresh if n != name]
        for name, reason in self._faults.pop(ctx.slot, []):
            self._fail(ctx, name, reason)
            fresh = [n for n in fresh if n != name]
        return sorted(fresh, key=self._rank.__getitem__)

    # -- the slot loop -----------------------------------------------------

    def advance_slot(self) -> SlotContext:
        s = self.slot
        env = self.env
        ctx = SlotContext(slot=s, env=env)

        for name in self._boundary(ctx):
            entry = self.active.get(name)
            if entry is None:
                continue
            try:
                entry.component.on_slot(SlotContext(slot=s - 1, env=env, blank=True))
            except Exception as exc:
                self._fail(ctx, name, f"{type(exc).__name__}: {exc}")

        # (1) queued commands, in declaration order
        for name in self.order:
            entry = self.active.get(name)
            if entry is None:
                continue
            for cmd in entry.port.drain():
                if isinstance(cmd, SendPreamble):
                    self._preambles.append((name, cmd.index))
                elif isinstance(cmd, SubmitRrc):
                    self._rrc.append((name, cmd))
                elif isinstance(cmd, StartInterference):
                    self._interferers[name] = cmd
                    self._event("interference", s, name, cmd.tx_power_dbm, cmd.distance_m)
                elif isinstance(cmd, StopInterference):
                    if self._interferers.pop(name, None) is not None:
                        self._event("interference_off", s, name)
                else:
                    raise TypeError(f"unknown command from {name}: {cmd!r}")

        # (2) RACH occasion
        gnb = self.gnb
        if self.gnb_up:
            for e in gnb.expire_pending(s):
                self._event("expire", s, e.rnti)
        if env.is_rach_occasion(s) and self._preambles:
            preambles = [RachPreamble(s, idx, src) for src, idx in self._preambles]
            self._preambles = []
            if self.gnb_up:
                outcomes = rach_occasion(gnb, preambles, self.rach_rng)
            else:
                outcomes = {(p.source, p.index): RachOutcome("dropped") for p in preambles}
            for (src, idx), out in outcomes.items():
                ctx.rach.setdefault(src, []).append((idx, out))
                self._event("rach", s, src, idx, out.kind, out.rnti)
            if gnb.failed and self.env.gnb_name in self.active:
                ctx.gnb_crashed = gnb.failure_reason
                self._gnb_down(ctx, gnb.failure_reason)

        # (3) RRC delivery
        rrc, self._rrc = self._rrc, []
        for src, cmd in rrc:
            result = self._deliver_rrc(ctx, src, cmd)
            ctx.rrc.setdefault(src, []).append(result)
            self._event("rrc", s, src, result.accepted, result.reason, result.rnti, result.connected)

        # (4) PDCCH
        if self.gnb_up:
            ctx.dcis = schedule_pdcch(gnb, s, gnb.connections.keys(), self.pdcch_rng)
            for d in ctx.dcis:
                self._event("dci", s, d.rnti, d.candidate, d.rb_start, d.rb_len, d.mcs)

        # (5) link budgets and RLF
        interference = [
            (src, cmd.tx_power_dbm - path_loss(cmd.distance_m, env.channel))
            for src, cmd in sorted(self._interferers.items())
        ]
        for rnti in sorted(gnb.connections):
            ue = gnb.connections[rnti]
            link = LinkBudget.for_link(ue.tx_power_dbm, ue.position_m, env.channel, [p for _, p in interference])
            value = link.sinr_db
            ctx.links[ue.source] = link
            self._event("sinr", s, ue.source, value)
            if ue.monitor.update(value) == RELEASED:
                self._release(ctx, rnti, "radio_link_failure", value)
        ctx.connected = {ue.source: rnti for rnti, ue in sorted(gnb.connections.items())}
        ctx.gnb_up = self.gnb_up
        ctx.pending_contention = len(gnb.pending_contention)
        ctx.emitters = [Emitter(ue.source, ue.tx_power_dbm, ue.position_m) for ue in gnb.connections.values()]
        ctx.emitters += [Emitter(src, cmd.tx_power_dbm, cmd.distance_m) for src, cmd in self._interferers.items()]
        ctx.emitters.sort(key=lambda e: e.source)

        # (6) components observe and prepare
        for name in self.order:
            entry = self.active.get(name)
            if entry is None:
                continue
            try:
                entry.component.on_slot(ctx)
            except Exception as exc:
                reason = str(exc) if exc.args else type(exc).__name__
                self._fail(ctx, name, reason)

        self.slot = s + 1
        return ctx

    def _deliver_rrc(self, ctx: SlotContext, src: str, cmd: SubmitRrc) -> RrcResult:
        gnb = self.gnb
        if not self.gnb_up:
            return RrcResult(False, "gnb_down", cmd.rnti)
        entry = gnb.pending_contention.pop(cmd.rnti, None) if cmd.rnti is not None else None
        try:
            decode_setup_request(cmd.buffer)
        except RrcReject as exc:
            return RrcResult(False, exc.reason, cmd.rnti)
        if entry is None:
            # Accepted but not tied to a contention grant: nothing to connect.
            return RrcResult(True, None, cmd.rnti)
        if entry.source != src:
            return RrcResult(False, "wrong_contender", cmd.rnti)
        if len(gnb.connections) >= gnb.params.max_connections:
            ctx.blocked.append(src)
            return RrcResult(True, "capacity", cmd.rnti, blocked=True)
        pos = self.env.positions.get(src) or self.env.channel.d0_m
        tx = cmd.tx_power_dbm if cmd.tx_power_dbm is not None else DEFAULT_UE_TX_DBM
        gnb.connections[cmd.rnti] = UeContext(
            rnti=cmd.rnti,
            source=src,
            position_m=pos,
            tx_power_dbm=tx,
            connected_slot=ctx.slot,
            monitor=RadioLinkMonitor(gnb.params.rlf_threshold_db, gnb.params.rlf_slots),
        )
        return RrcResult(True, None, cmd.rnti, connected=True)

    def run(self, slots: int) -> None:
        for _ in range(slots):
            self.advance_slot()


__all__ = [
    "COLLISION",
    "GRANTED",
    "Emitter",
    "Environment",
    "Release",
    "RrcResult",
    "Simulation",
    "SlotContext",
]
