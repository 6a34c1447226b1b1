"""gNB state and RACH contention."""
from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field

from .rlf import RadioLinkMonitor

NUM_PREAMBLES = 64
RNTI_MIN = 0x0001
RNTI_MAX = 0xFFEF

GRANTED = "granted"
COLLISION = "collision"
DROPPED = "dropped"


@dataclass(frozen=True)
class GnbParams:
    max_connections: int = 32
    rach_period_slots: int = 10
    pdcch_candidates: int = 16
    pdcch_period_slots: int = 1
    pending_capacity: int = 128
    contention_timeout_slots: int = 30
    crash_on_overflow: bool = False
    rlf_threshold_db: float = -5.0
    rlf_slots: int = 10
    num_rbs: int = 52


@dataclass(frozen=True)
class RachPreamble:
    occasion: int
    index: int
    source: str

    def __post_init__(self):
        if not 0 <= self.index < NUM_PREAMBLES:
            raise ValueError(f"preamble index out of range: {self.index}")


@dataclass(frozen=True)
class RachOutcome:
    kind: str
    rnti: int | None = None


@dataclass
class PendingEntry:
    rnti: int
    source: str
    index: int
    slot: int


@dataclass
class UeContext:
    rnti: int
    source: str
    position_m: float
    tx_power_dbm: float
    connected_slot: int
    monitor: RadioLinkMonitor


@dataclass
class GnbState:
    params: GnbParams = field(default_factory=GnbParams)
    connections: dict[int, UeContext] = field(default_factory=dict)
    pending_contention: dict[int, PendingEntry] = field(default_factory=dict)
    failed: bool = False
    failure_reason: str | None = None
    _next_rnti: int = 0x4601

    def allocate_rnti(self) -> int:
        for _ in range(RNTI_MAX):
            rnti = self._next_rnti
            self._next_rnti = rnti + 1 if rnti < RNTI_MAX else RNTI_MIN
            if rnti not in self.connections and rnti not in self.pending_contention:
                return rnti
        raise RuntimeError("RNTI space exhausted")

    def expire_pending(self, slot: int) -> list[PendingEntry]:
        timeout = self.params.contention_timeout_slots
        stale = [e for e in self.pending_contention.values() if slot - e.slot >= timeout]
        for e in stale:
            del self.pending_contention[e.rnti]
        return stale

    def crash(self, reason: str) -> None:
        self.failed = True
        self.failure_reason = reason


def rach_occasion(
    gnb: GnbState, preambles: list[RachPreamble], rng: random.Random
) -> dict[tuple[str, int], RachOutcome]:
    """Resolve one RACH occasion.

    Outcomes are keyed by contender ``(source, index)``: a source repeating
    an index in the same occasion transmits it once. An index sent by
    exactly one source is granted a fresh RNTI and a pending-contention
    entry; an index sent by two or more sources collides for all of them.
    Grants that would push pending contention past its capacity are
    dropped, chosen at random, and crash the gNB if ``crash_on_overflow``.
    """
    if len({p.occasion for p in preambles}) > 1:
        raise ValueError("preambles span more than one occasion")
    contenders = list(dict.fromkeys((p.source, p.index) for p in preambles))
    if gnb.failed:
        return {c: RachOutcome(DROPPED) for c in contenders}
    per_index = Counter(idx for _, idx in contenders)
    outcomes: dict[tuple[str, int], RachOutcome] = {}
    winners = []
    for c in contenders:
        if per_index[c[1]] == 1:
            winners.append(c)
        else:
            outcomes[c] = RachOutcome(COLLISION)
    winners.sort(key=lambda c: c[1])
    room = max(gnb.params.pending_capacity - len(gnb.pending_contention), 0)
    admitted = set(winners)
    if len(winners) > room:
        shuffled = list(winners)
        rng.shuffle(shuffled)
        admitted = set(shuffled[:room])
        if gnb.params.crash_on_overflow:
            gnb.crash("contention overflow")
    occasion = preambles[0].occasion if preambles else 0
    for c in winners:
        if c in admitted:
            rnti = gnb.allocate_rnti()
            gnb.pending_contention[rnti] = PendingEntry(rnti, c[0], c[1], occasion)
            outcomes[c] = RachOutcome(GRANTED, rnti)
        else:
            outcomes[c] = RachOutcome(DROPPED)
    return {c: outcomes[c] for c in contenders}
