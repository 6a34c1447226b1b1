"""Log-distance path loss and SINR link budgets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

from ..config import ChannelSpec


def path_loss(d_m: float, channel: ChannelSpec) -> float:
    """Path loss in dB; distances below ``d0_m`` are clamped to ``d0_m``."""
    d = max(d_m, channel.d0_m)
    return channel.pl0_db + 10.0 * channel.exponent * math.log10(d / channel.d0_m)


def dbm_to_mw(x_dbm: float) -> float:
    return 10.0 ** (x_dbm / 10.0)


def mw_to_dbm(x_mw: float) -> float:
    return 10.0 * math.log10(x_mw)


def sinr_db(signal_dbm: float, interferers_dbm: Iterable[float], noise_dbm: float) -> float:
    total = dbm_to_mw(noise_dbm) + sum(dbm_to_mw(i) for i in interferers_dbm)
    return signal_dbm - mw_to_dbm(total)


def sinr(link: "LinkBudget | float", interferers_dbm: Iterable[float], noise_dbm: float) -> float:
    signal = link.rx_power_dbm if isinstance(link, LinkBudget) else link
    return sinr_db(signal, interferers_dbm, noise_dbm)


@dataclass
class LinkBudget:
    tx_power_dbm: float
    distance_m: float
    rx_power_dbm: float
    noise_dbm: float
    interference_dbm: list[float] = field(default_factory=list)

    @classmethod
    def for_link(cls, tx_power_dbm: float, distance_m: float, channel: ChannelSpec,
                 interference_dbm: Iterable[float] = ()) -> "LinkBudget":
        return cls(
            tx_power_dbm=tx_power_dbm,
            distance_m=distance_m,
            rx_power_dbm=tx_power_dbm - path_loss(distance_m, channel),
            noise_dbm=channel.noise_dbm,
            interference_dbm=list(interference_dbm),
        )

    @property
    def sinr_db(self) -> float:
        return sinr_db(self.rx_power_dbm, self.interference_dbm, self.noise_dbm)
