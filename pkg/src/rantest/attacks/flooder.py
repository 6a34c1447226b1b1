from __future__ import annotations

from ..ransim.commands import SendPreamble
from ..ransim.rach import NUM_PREAMBLES
from ..component import Component, ComponentError, Param, register


@register("rach_flooder")
class RachFlooder(Component):
    """Sends F preambles with uniform random indexes at every RACH occasion."""

    PARAMS = {
        "preambles_per_occasion": Param("int", required=True, minimum=1),
        "start_slot": Param("int", required=True, minimum=0),
        "stop_slot": Param("int", required=True, minimum=0),
    }

    def setup(self):
        p = self.params
        if p["start_slot"] > p["stop_slot"]:
            raise ComponentError("bad params: start_slot must be <= stop_slot")
        self.sent_at: int | None = None

    def prepare(self, slot):
        p = self.params
        if p["start_slot"] <= slot <= p["stop_slot"] and self.env.is_rach_occasion(slot):
            for _ in range(p["preambles_per_occasion"]):
                self.emit(SendPreamble(self.rng.randrange(NUM_PREAMBLES)))
            self.sent_at = slot

    def observe(self, ctx):
        outcomes = ctx.rach.get(self.name)
        if self.sent_at == ctx.slot:
            granted = sum(o.kind == "granted" for _, o in outcomes or ())
            self.metrics.write(
                "flood_sent",
                {
                    "count": self.params["preambles_per_occasion"],
                    "distinct": len(outcomes or ()),
                    "granted": granted,
                },
                ctx.slot,
                {"attack": "rach_flood"},
            )
