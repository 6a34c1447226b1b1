from __future__ import annotations

from ..ransim.commands import StartInterference, StopInterference
from ..component import Component, ComponentError, Param, register

JAMMER_BASE_DBM = 0.0


@register("jammer")
class Jammer(Component):
    """Continuous interferer active over ``[start_slot, stop_slot]``.

    Transmits at ``0 dBm + gain_db``; victims see it attenuated by the path
    loss over ``distance_m``.
    """

    PARAMS = {
        "gain_db": Param("float", required=True),
        "start_slot": Param("int", required=True, minimum=0),
        "stop_slot": Param("int", required=True, minimum=0),
        "distance_m": Param("float", required=True, minimum=0.0),
    }

    def setup(self):
        p = self.params
        if p["start_slot"] > p["stop_slot"]:
            raise ComponentError("bad params: start_slot must be <= stop_slot")
        self.tx_power_dbm = JAMMER_BASE_DBM + p["gain_db"]
        self.on = False

    def active(self, slot: int) -> bool:
        return self.params["start_slot"] <= slot <= self.params["stop_slot"]

    def prepare(self, slot):
        want = self.active(slot)
        if want and not self.on:
            self.emit(StartInterference(self.tx_power_dbm, self.params["distance_m"]))
            self.log("info", f"jamming on at {self.tx_power_dbm:.1f} dBm", slot)
        elif self.on and not want:
            self.emit(StopInterference())
            self.log("info", "jamming off", slot)
        self.on = want

    def observe(self, ctx):
        if self.active(ctx.slot):
            self.metrics.write(
                "jam_active",
                {"gain_db": self.params["gain_db"], "tx_dbm": self.tx_power_dbm},
                ctx.slot,
                {"attack": "jammer"},
            )
