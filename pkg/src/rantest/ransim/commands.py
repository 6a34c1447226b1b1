"""Commands components emit toward the simulator, applied at slot boundaries."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass


@dataclass(frozen=True)
class SendPreamble:
    index: int


@dataclass(frozen=True)
class SubmitRrc:
    buffer: bytes
    rnti: int | None = None
    tx_power_dbm: float | None = None


@dataclass(frozen=True)
class StartInterference:
    tx_power_dbm: float
    distance_m: float


@dataclass(frozen=True)
class StopInterference:
    pass


class CommandPort:
    def __init__(self, source: str):
        self.source = source
        self._queue: deque = deque()

    def emit(self, command) -> None:
        self._queue.append(command)

    def drain(self) -> list:
        out = []
        while self._queue:
            out.append(self._queue.popleft())
        return out

    def __len__(self) -> int:
        return len(self._queue)
