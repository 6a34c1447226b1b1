from __future__ import annotations

import random

from ..ransim.commands import SubmitRrc
from ..ransim.rrc import IDENTITY_MAX, LENGTH_BITS, MAX_CAUSE, RrcSetupRequest, encode_setup_request
from ..component import Component, ComponentError, Param, register


def flip_bits(buffer: bytes, k: int, rng: random.Random) -> bytes:
    """Invert ``k`` distinct, uniformly chosen bits (MSB-first positions)."""
    nbits = len(buffer) * 8
    if not 0 <= k <= nbits:
        raise ValueError(f"cannot flip {k} bits of a {nbits}-bit buffer")
    out = bytearray(buffer)
    for pos in rng.sample(range(nbits), k):
        out[pos // 8] ^= 0x80 >> (pos % 8)
    return bytes(out)


@register("rrc_fuzzer")
class RrcFuzzer(Component):
    """Sends bit-flipped RRC setup requests, one attempt per slot."""

    PARAMS = {
        "bits_to_flip": Param("int", required=True, minimum=0),
        "attempts": Param("int", required=True, minimum=0),
        "target": Param("str", required=True, ref_kind="gnb"),
        "start_slot": Param("int", default=0, minimum=0),
    }

    def setup(self):
        if self.params["bits_to_flip"] > LENGTH_BITS:
            raise ComponentError(f"bad params: bits_to_flip must be <= {LENGTH_BITS}")
        self.sent = 0
        self.successes = 0
        self.k = self.params["bits_to_flip"]

    def prepare(self, slot):
        if slot < self.params["start_slot"] or self.sent >= self.params["attempts"]:
            return
        msg = RrcSetupRequest(self.rng.randrange(IDENTITY_MAX + 1), self.rng.randrange(MAX_CAUSE + 1))
        buf = flip_bits(encode_setup_request(msg), self.k, self.rng)
        self.emit(SubmitRrc(buf))
        self.sent += 1

    def observe(self, ctx):
        for result in ctx.rrc.get(self.name, ()):
            self.successes += result.accepted
            self.metrics.write(
                "rrc_attempt",
                {"success": float(result.accepted)},
                ctx.slot,
                {"attack": "rrc_fuzz", "k": str(self.k), "reason": result.reason or "accepted"},
            )
