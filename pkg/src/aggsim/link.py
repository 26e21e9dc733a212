"""Radio link abstraction: log-distance path loss, Rayleigh block-fading
outage probability, and the payload-to-resource-block mapping at the fixed
modulation and coding rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import PhyParams

THERMAL_NOISE_DBM_PER_HZ = -174.0
RB_BANDWIDTH_HZ = 180_000.0

_PL_REF_DB = 128.1      # at 1 km
_PL_SLOPE_DB = 37.6     # per decade of distance


def pathloss_db(distance_m: float, min_distance_m: float = 35.0) -> float:
    """Macro-cell log-distance loss, floored below `min_distance_m`."""
    if distance_m <= 0:
        raise ValueError("distance must be > 0")
    d = max(distance_m, min_distance_m)
    return _PL_REF_DB + _PL_SLOPE_DB * math.log10(d / 1000.0)


def noise_power_dbm(noise_figure_db: float, num_rbs: int = 1) -> float:
    bandwidth = RB_BANDWIDTH_HZ * num_rbs
    return THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(bandwidth) + noise_figure_db


def error_probability(mean_snr_db: float, snr_threshold_db: float) -> float:
    """Outage of a Rayleigh block-fading link: the SNR of each transmission
    is drawn independently; failure when it falls below the threshold."""
    return 1.0 - math.exp(-(10.0 ** ((snr_threshold_db - mean_snr_db) / 10.0)))


def required_rbs(payload_bytes: int, tbs_bits_per_rb: int) -> int:
    if payload_bytes < 1:
        raise ValueError("payload must be >= 1 byte")
    return -(-8 * payload_bytes // tbs_bits_per_rb)


@dataclass(frozen=True)
class LinkBudget:
    distance_m: float
    tx_power_dbm: float
    pathloss_db: float
    noise_power_dbm: float

    @property
    def mean_snr_db(self) -> float:
        return self.tx_power_dbm - self.pathloss_db - self.noise_power_dbm


def uplink_budget(distance_m: float, phy: PhyParams, num_rbs: int = 1) -> LinkBudget:
    return LinkBudget(
        distance_m=distance_m,
        tx_power_dbm=phy.ul_tx_power_dbm,
        pathloss_db=pathloss_db(distance_m, phy.pathloss_min_distance_m),
        noise_power_dbm=noise_power_dbm(phy.noise_figure_db, num_rbs),
    )


def downlink_budget(distance_m: float, phy: PhyParams, num_rbs: int = 1) -> LinkBudget:
    return LinkBudget(
        distance_m=distance_m,
        tx_power_dbm=phy.dl_tx_power_dbm,
        pathloss_db=pathloss_db(distance_m, phy.pathloss_min_distance_m),
        noise_power_dbm=noise_power_dbm(phy.noise_figure_db, num_rbs),
    )


def link_error_probabilities(distance_m: float, phy: PhyParams) -> tuple[float, float]:
    """(uplink, downlink) per-transmission error probability for a UE at the
    given distance, evaluated over a single-RB noise bandwidth."""
    up = error_probability(uplink_budget(distance_m, phy).mean_snr_db, phy.snr_threshold_db)
    down = error_probability(downlink_budget(distance_m, phy).mean_snr_db, phy.snr_threshold_db)
    return up, down
