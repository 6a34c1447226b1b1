"""Legitimate RAN nodes: the gNB and user equipment."""
from __future__ import annotations

from ..component import Component, ComponentError, ComponentFailure, Param, register
from .commands import SendPreamble, SubmitRrc
from .rach import GRANTED, NUM_PREAMBLES
from .rrc import IDENTITY_MAX, RrcSetupRequest, encode_setup_request


@register("gnb")
class GnbNode(Component):
    """Measures uplink SINR per connected UE and reports link events."""

    PARAMS = {
        "max_connections": Param("int", default=32, minimum=1),
        "rach_period_slots": Param("int", default=10, minimum=1),
        "pdcch_candidates": Param("int", default=16, minimum=1),
        "pdcch_period_slots": Param("int", default=1, minimum=1),
        "pending_capacity": Param("int", default=128, minimum=0),
        "contention_timeout_slots": Param("int", default=30, minimum=1),
        "crash_on_overflow": Param("bool", default=False),
        "rlf_threshold_db": Param("float", default=-5.0),
        "rlf_slots": Param("int", default=10, minimum=1),
    }

    def setup(self):
        self._connections = None

    def observe(self, ctx):
        if ctx.gnb_crashed:
            self.log("error", f"gnb crashed: {ctx.gnb_crashed}", ctx.slot)
            raise ComponentFailure(f"gnb crashed: {ctx.gnb_crashed}")
        for ue, link in ctx.links.items():
            self.metrics.write(
                "sinr",
                {"sinr_db": link.sinr_db, "rx_dbm": link.rx_power_dbm},
                ctx.slot,
                {"ue": ue},
            )
        for rel in ctx.released:
            fields = {"rnti": rel.rnti}
            if rel.sinr_db is not None:
                fields["sinr_db"] = rel.sinr_db
            self.metrics.write("release", fields, ctx.slot, {"ue": rel.source, "reason": rel.reason})
            self.log("info", f"released {rel.source} (rnti {rel.rnti:#06x}): {rel.reason}", ctx.slot)
        for ue in ctx.blocked:
            self.metrics.write("blocked", {"count": 1}, ctx.slot, {"ue": ue})
        if len(ctx.connected) != self._connections:
            self._connections = len(ctx.connected)
            self.metrics.write(
                "gnb_state",
                {"connections": len(ctx.connected), "pending_contention": ctx.pending_contention},
                ctx.slot,
            )


IDLE, WAITING_RACH, GRANTED_STATE, WAITING_RRC, CONNECTED, RELEASED = (
    "idle", "waiting_rach", "granted", "waiting_rrc", "connected", "released",
)


@register("ue")
class UeNode(Component):
    """A legitimate UE: contention-based attach, then receives DCI grants."""

    POSITION_REQUIRED = True
    PARAMS = {
        "attach_slot": Param("int", default=0, minimum=0),
        "tx_power_dbm": Param("float", default=20.0),
        "establishment_cause": Param("int", default=3, minimum=0),
        "reattach": Param("bool", default=False),
    }

    def setup(self):
        if self.params["establishment_cause"] > 7:
            raise ComponentError("bad params: establishment_cause must be in [0, 7]")
        self.state = IDLE
        self.rnti = None
        self.attempts = 0
        self.identity = self.rng.randrange(IDENTITY_MAX + 1)

    def prepare(self, slot):
        if self.state == IDLE and slot >= self.params["attach_slot"]:
            self.emit(SendPreamble(self.rng.randrange(NUM_PREAMBLES)))
            self.state = WAITING_RACH
        elif self.state == GRANTED_STATE:
            msg = RrcSetupRequest(self.identity, self.params["establishment_cause"])
            self.emit(SubmitRrc(encode_setup_request(msg), self.rnti, self.params["tx_power_dbm"]))
            self.state = WAITING_RRC

    def observe(self, ctx):
        for _, outcome in ctx.rach.get(self.name, ()):
            self.attempts += 1
            granted = outcome.kind == GRANTED
            self.metrics.write(
                "rach_attempt",
                {"granted": float(granted), "attempt": self.attempts},
                ctx.slot,
                {"outcome": outcome.kind},
            )
            if granted:
                self.rnti = outcome.rnti
                self.state = GRANTED_STATE
            else:
                self.state = IDLE
        for result in ctx.rrc.get(self.name, ()):
            if result.connected:
                self.state = CONNECTED
                self.metrics.write("attach", {"rnti": self.rnti, "attempts": self.attempts}, ctx.slot)
                self.log("info", f"connected as rnti {self.rnti:#06x}", ctx.slot)
            else:
                self.state = IDLE
                self.rnti = None
        for rel in ctx.released:
            if rel.source == self.name:
                self.state = IDLE if self.params["reattach"] else RELEASED
                self.rnti = None
                self.log("warn", f"released: {rel.reason}", ctx.slot)
        if self.state == CONNECTED and ctx.gnb_up and ctx.slot % ctx.env.gnb.pdcch_period_slots == 0:
            got = any(d.rnti == self.rnti for d in ctx.dcis)
            self.metrics.write("dci_grant", {"received": float(got)}, ctx.slot)
