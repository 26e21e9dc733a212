import math

import numpy as np
import pytest

from aggsim.config import PhyParams
from aggsim.link import (
    downlink_budget,
    error_probability,
    link_error_probabilities,
    noise_power_dbm,
    pathloss_db,
    required_rbs,
    uplink_budget,
)


def test_pathloss_reference_distances():
    assert pathloss_db(1000.0) == pytest.approx(128.1, abs=1e-9)
    assert pathloss_db(100.0) == pytest.approx(128.1 - 37.6, abs=1e-9)


def test_pathloss_floor_below_min_distance():
    assert pathloss_db(10.0) == pathloss_db(35.0)
    assert pathloss_db(1e-3) == pathloss_db(35.0)


def test_pathloss_strictly_increasing():
    distances = np.linspace(36.0, 3000.0, 200)
    losses = [pathloss_db(d) for d in distances]
    assert all(b > a for a, b in zip(losses, losses[1:]))


def test_pathloss_rejects_nonpositive_distance():
    with pytest.raises(ValueError):
        pathloss_db(0.0)


def test_error_probability_closed_forms():
    assert error_probability(5.0, 5.0) == pytest.approx(1 - math.exp(-1))
    assert error_probability(15.0, 5.0) == pytest.approx(1 - math.exp(-0.1))
    assert error_probability(100.0, -1000.0) == 0.0


def test_error_probability_monotone():
    probs = [error_probability(snr, 5.0) for snr in np.linspace(-10, 30, 50)]
    assert all(b < a for a, b in zip(probs, probs[1:]))
    probs_thr = [error_probability(10.0, th) for th in np.linspace(-10, 20, 50)]
    assert all(b > a for a, b in zip(probs_thr, probs_thr[1:]))


def test_error_probability_empirical_rate():
    # 10^5 independent Rayleigh SNR draws against the threshold
    p = error_probability(11.0, 4.0)
    rng = np.random.default_rng(3)
    mean_snr_lin = 10 ** (11.0 / 10)
    thr_lin = 10 ** (4.0 / 10)
    draws = rng.exponential(mean_snr_lin, 100_000)
    rate = float((draws < thr_lin).mean())
    sigma = math.sqrt(p * (1 - p) / 100_000)
    assert abs(rate - p) <= 3 * sigma


def test_required_rbs_arithmetic():
    assert required_rbs(100, 296) == 3
    assert required_rbs(37, 296) == 1
    assert required_rbs(1000, 296) == 28
    # 28 RBs at 6 per subframe span 5 subframes
    assert -(-required_rbs(1000, 296) // 6) == 5


def test_required_rbs_rejects_empty_payload():
    with pytest.raises(ValueError):
        required_rbs(0, 296)


def test_required_rbs_nondecreasing_and_subadditive():
    rng = np.random.default_rng(9)
    sizes = rng.integers(1, 3000, size=300)
    prev = 0
    for size in sorted(sizes):
        now = required_rbs(int(size), 296)
        assert now >= prev
        prev = now
    for _ in range(300):
        a, b = rng.integers(1, 2000, size=2)
        assert required_rbs(int(a + b), 296) <= required_rbs(int(a), 296) + required_rbs(int(b), 296)


def test_link_budget_components_consistent():
    phy = PhyParams()
    up = uplink_budget(700.0, phy)
    assert up.mean_snr_db == pytest.approx(
        up.tx_power_dbm - up.pathloss_db - up.noise_power_dbm)
    assert up.noise_power_dbm == pytest.approx(
        -174 + 10 * math.log10(180e3) + phy.noise_figure_db)
    down = downlink_budget(700.0, phy)
    assert down.tx_power_dbm == 30.0 and up.tx_power_dbm == 23.0
    assert down.mean_snr_db > up.mean_snr_db


def test_cell_edge_uplink_error_near_ten_percent():
    # Default threshold calibration: ~10% outage at the 1000 m edge.
    p_ul, p_dl = link_error_probabilities(1000.0, PhyParams())
    assert 0.05 < p_ul < 0.15
    assert p_dl < p_ul
