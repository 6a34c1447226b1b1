from __future__ import annotations

from dataclasses import dataclass, field

from ..ransim.channel import path_loss
from ..component import Component, Param, register

NOISE_SOURCE = "noise"


@dataclass
class IqBurst:
    start_slot: int
    length: int
    sources: list[str] = field(default_factory=list)
    # rows[i][j]: received dBm of sources[j] at start_slot + i, None if silent
    matrix: list[list[float | None]] = field(default_factory=list)


@register("iq_collector")
class IqCollector(Component):
    """Records per-source received power at its position in periodic bursts."""

    PASSIVE = True
    PARAMS = {
        "burst_len": Param("int", required=True, minimum=1),
        "period": Param("int", required=True, minimum=1),
    }

    def setup(self):
        self.position = self.spec.position_m or 0.0
        self.bursts: list[IqBurst] = []
        self._open: dict[int, dict] = {}

    def observe(self, ctx):
        B, period = self.params["burst_len"], self.params["period"]
        channel = ctx.env.channel
        row = {NOISE_SOURCE: channel.noise_dbm}
        for e in ctx.emitters:
            row[e.source] = e.tx_power_dbm - path_loss(abs(e.position_m - self.position), channel)
        if ctx.slot % period == 0:
            self._open[ctx.slot] = {}
        for start in list(self._open):
            self._open[start][ctx.slot] = row
            if ctx.slot - start + 1 >= B:
                self._close(start)

    def _close(self, start: int) -> None:
        rows = self._open.pop(start)
        sources = [NOISE_SOURCE] + sorted({s for r in rows.values() for s in r} - {NOISE_SOURCE})
        burst = IqBurst(start, len(rows), sources, [[r.get(s) for s in sources] for _, r in sorted(rows.items())])
        self.bursts.append(burst)
        peak = max(v for r in burst.matrix for v in r if v is not None)
        self.metrics.write("iq_burst", {"rows": burst.length, "sources": len(sources), "peak_dbm": peak}, start)

    def stop(self):
        for start in sorted(self._open):
            self._close(start)
        super().stop()

    def csv_text(self) -> str:
        lines = ["slot,source,power_dbm"]
        for burst in self.bursts:
            for i, values in enumerate(burst.matrix):
                for source, v in zip(burst.sources, values):
                    if v is not None:
                        lines.append(f"{burst.start_slot + i},{source},{v!r}")
        return "\n".join(lines) + "\n"

    def artifacts(self):
        return {f"iq_{self.name}.csv": self.csv_text()}
