"""Independent reference computations used as test oracles.

Nothing here imports the package under test; each function restates the
model from first principles (string bit-packing, brute-force enumeration,
naive loops) so a shared bug cannot hide in both places.
"""
from __future__ import annotations

import itertools
import math
from collections import defaultdict

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) % (1 << 64)
    return h


def seed_for(seed: int, name: str) -> int:
    return fnv1a64(seed.to_bytes(8, "big") + name.encode("utf-8"))


# -- RRC SetupRequest, packed as a string of '0'/'1' characters -------------

def pack_setup_request(identity: int, cause: int, msg_type: int = 1, spare: int = 0) -> bytes:
    bits = format(msg_type, "08b") + format(identity, "039b") + format(cause, "04b") + format(spare, "05b")
    assert len(bits) == 56
    return bytes(int(bits[i:i + 8], 2) for i in range(0, 56, 8))


def unpack_setup_request(buf: bytes):
    """Returns ("ok", identity, cause) or ("reject", reason)."""
    bits = "".join(format(b, "08b") for b in buf)
    msg_type = int(bits[0:8], 2)
    identity = int(bits[8:47], 2)
    cause = int(bits[47:51], 2)
    spare = int(bits[51:56], 2)
    if msg_type != 1:
        return ("reject", "bad_type")
    if cause > 7:
        return ("reject", "bad_cause")
    if spare != 0:
        return ("reject", "bad_spare")
    return ("ok", identity, cause)


def flip(buf: bytes, positions) -> bytes:
    bits = list("".join(format(b, "08b") for b in buf))
    for p in positions:
        bits[p] = "1" if bits[p] == "0" else "0"
    s = "".join(bits)
    return bytes(int(s[i:i + 8], 2) for i in range(0, len(s), 8))


def fuzz_success_probability(k: int) -> float:
    return math.comb(42, k) / math.comb(56, k)


def exhaustive_single_flip_accepts(identity: int = 12345, cause: int = 3) -> int:
    buf = pack_setup_request(identity, cause)
    return sum(unpack_setup_request(flip(buf, [p]))[0] == "ok" for p in range(56))


# -- channel ----------------------------------------------------------------

def path_loss_db(d_m: float, pl0: float = 40.0, d0: float = 1.0, n: float = 2.7) -> float:
    return pl0 + 10 * n * math.log10(max(d_m, d0) / d0)


def sinr_db(signal_dbm: float, interferers_dbm, noise_dbm: float) -> float:
    total_mw = 10 ** (noise_dbm / 10) + sum(10 ** (i / 10) for i in interferers_dbm)
    return signal_dbm - 10 * math.log10(total_mw)


def uplink_sinr(ue_distance: float, jammers=(), ue_tx: float = 20.0, noise: float = -94.0, **channel) -> float:
    """``jammers`` holds (gain_db, distance_m) pairs measured at the gNB."""
    signal = ue_tx - path_loss_db(ue_distance, **channel)
    interf = [g - path_loss_db(d, **channel) for g, d in jammers]
    return sinr_db(signal, interf, noise)


# -- RACH / PDCCH closed forms -----------------------------------------------

def flood_grant_probability(flood: int, preambles: int = 64) -> float:
    return ((preambles - 1) / preambles) ** flood


def capture_probability(n_ues: int, candidates: int = 16) -> float:
    """Brute-force enumeration over all candidate assignments."""
    hits = total = 0
    for assign in itertools.product(range(candidates), repeat=n_ues):
        counts = defaultdict(int)
        for c in assign:
            counts[c] += 1
        hits += sum(counts[c] == 1 for c in assign)
        total += n_ues
    return hits / total


def binomial_sigma(p: float, n: int) -> float:
    return math.sqrt(p * (1 - p) / n)


# -- metrics aggregation ----------------------------------------------------

def naive_windowed(points, lo: int, hi: int, window: int, agg: str):
    """points: list of (ts, value). Returns sorted [(bucket_start, value)]."""
    buckets: dict[int, list[float]] = {}
    for ts, v in points:
        if lo <= ts <= hi:
            b = (ts - lo) // window
            buckets.setdefault(b, []).append(v)
    out = []
    for b in sorted(buckets):
        vals = buckets[b]
        if agg == "mean":
            r = math.fsum(vals) / len(vals)
        elif agg == "max":
            r = max(vals)
        elif agg == "min":
            r = min(vals)
        elif agg == "count":
            r = float(len(vals))
        else:
            raise ValueError(agg)
        out.append((lo + b * window, r))
    return out
