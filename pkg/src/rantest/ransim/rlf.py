"""Radio link failure detection."""
from __future__ import annotations

OK = "ok"
RELEASED = "released"


class RadioLinkMonitor:
    """Declares failure after ``slots`` consecutive samples below ``threshold_db``."""

    def __init__(self, threshold_db: float = -5.0, slots: int = 10):
        self.threshold_db = threshold_db
        self.slots = slots
        self.below = 0
        self.released = False

    def update(self, sinr_db: float) -> str:
        if self.released:
            return RELEASED
        if sinr_db < self.threshold_db:
            self.below += 1
        else:
            self.below = 0
        if self.below >= self.slots:
            self.released = True
            return RELEASED
        return OK


def radio_link_monitor(sinr_series, threshold_db: float = -5.0, slots: int = 10) -> int | None:
    """Index of the release sample in ``sinr_series``, or None if the link holds."""
    mon = RadioLinkMonitor(threshold_db, slots)
    for i, s in enumerate(sinr_series):
        if mon.update(s) == RELEASED:
            return i
    return None
