from __future__ import annotations

from collections import Counter

from ..ransim.pdcch import decodable
from ..component import Component, Param, register


@register("dci_sniffer")
class DciSniffer(Component):
    """Passive PDCCH observer.

    A DCI is captured only when no other DCI in the slot shares its PDCCH
    candidate; colliding DCIs are all lost.
    """

    PASSIVE = True
    PARAMS = {"target": Param("str", required=True, ref_kind="gnb")}

    def setup(self):
        self.seen = 0
        self.captured = 0
        self.per_rnti: Counter[int] = Counter()
        self.records = []

    @property
    def rntis(self) -> set[int]:
        return set(self.per_rnti)

    @property
    def capture_rate(self) -> float:
        return self.captured / self.seen if self.seen else 0.0

    def observe(self, ctx):
        if not ctx.dcis:
            return
        got = decodable(ctx.dcis)
        self.seen += len(ctx.dcis)
        self.captured += len(got)
        for d in got:
            self.per_rnti[d.rnti] += 1
        self.metrics.write(
            "dci_capture",
            {
                "captured": len(got),
                "total": len(ctx.dcis),
                "rate": self.capture_rate,
                "rntis": len(self.per_rnti),
            },
            ctx.slot,
            {"attack": "dci_sniff"},
        )
