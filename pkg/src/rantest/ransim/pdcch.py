"""PDCCH scheduling: one DCI per active RNTI per scheduling period."""
from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

from .rach import GnbState

MAX_MCS = 28


@dataclass(frozen=True)
class DciRecord:
    slot: int
    rnti: int
    candidate: int
    rb_start: int
    rb_len: int
    mcs: int


def schedule_pdcch(gnb: GnbState, slot: int, active_rntis: Iterable[int], rng: random.Random) -> list[DciRecord]:
    p = gnb.params
    if slot % p.pdcch_period_slots:
        return []
    out = []
    for rnti in sorted(active_rntis):
        candidate = rng.randrange(p.pdcch_candidates)
        rb_len = rng.randint(1, p.num_rbs)
        rb_start = rng.randrange(p.num_rbs - rb_len + 1)
        mcs = rng.randint(0, MAX_MCS)
        out.append(DciRecord(slot, rnti, candidate, rb_start, rb_len, mcs))
    return out


def decodable(dcis: list[DciRecord]) -> list[DciRecord]:
    """DCIs whose candidate no other DCI in the same slot occupies."""
    used = Counter((d.slot, d.candidate) for d in dcis)
    return [d for d in dcis if used[(d.slot, d.candidate)] == 1]
