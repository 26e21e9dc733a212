import json

import pytest

from aggsim.config import (
    ConfigError,
    ScenarioConfig,
    apply_override,
    config_from_dict,
    derive_run_seed,
    load_config,
    serialize,
)

FULL_DOC = {
    "num_mtds": 5000,
    "num_aggregators": 10,
    "packet_rate_lambda_app": 1 / 60,
    "bundle_limit": 10,
}


def test_empty_document_names_required_fields():
    with pytest.raises(ConfigError) as err:
        load_config("{}")
    for name in ("num_mtds", "num_aggregators", "packet_rate_lambda_app", "bundle_limit"):
        assert name in str(err.value)


def test_defaults_match_reference_table():
    cfg = config_from_dict(FULL_DOC)
    assert cfg.prach.num_preambles == 54
    assert cfg.prach.backoff_subframes == 20
    assert cfg.prach.max_ra_attempts_per_payload == 10
    assert cfg.prach.preamble_trans_max == 10
    assert cfg.prach.rao_period_subframes == 10
    assert cfg.harq.max_data_retransmissions == 1
    assert cfg.phy.ul_rbs_per_subframe == 6
    assert cfg.sim_length_s == 60.0
    assert cfg.timing.processing_time_ms == 3
    assert cfg.packet_size_bytes == 100
    assert cfg.cell_radius_m == 1000.0
    assert cfg.rrc.idle_timeout_ms == 100
    assert cfg.phy.ul_tx_power_dbm == 23.0
    assert cfg.phy.dl_tx_power_dbm == 30.0
    assert cfg.timing.fragmentation_threshold_rbs == 6


def test_bundle_limit_zero_rejected():
    doc = dict(FULL_DOC, bundle_limit=0)
    with pytest.raises(ConfigError) as err:
        config_from_dict(doc)
    assert "bundle_limit" in str(err.value)


@pytest.mark.parametrize("field,value", [
    ("num_mtds", -1),
    ("num_aggregators", -2),
    ("cell_radius_m", 0),
    ("sim_length_s", -5),
])
def test_invariant_violations_name_the_field(field, value):
    doc = dict(FULL_DOC)
    doc[field] = value
    with pytest.raises(ConfigError) as err:
        config_from_dict(doc)
    assert field in str(err.value)


def test_fragmentation_threshold_bounded_by_ul_rbs():
    doc = dict(FULL_DOC, timing={"fragmentation_threshold_rbs": 7})
    with pytest.raises(ConfigError) as err:
        config_from_dict(doc)
    assert "fragmentation_threshold_rbs" in str(err.value)


def test_unknown_fields_rejected():
    with pytest.raises(ConfigError) as err:
        config_from_dict(dict(FULL_DOC, bogus=1))
    assert "bogus" in str(err.value)
    with pytest.raises(ConfigError) as err:
        config_from_dict(dict(FULL_DOC, phy={"bogus_knob": 3}))
    assert "phy.bogus_knob" in str(err.value)


def test_malformed_document_is_a_parse_error():
    with pytest.raises(ConfigError):
        load_config("{not json")


def test_round_trip_identity():
    cfg = config_from_dict(FULL_DOC)
    assert load_config(serialize(cfg)) == cfg
    # and the serialized document round-trips byte-identically
    assert serialize(load_config(serialize(cfg))) == serialize(cfg)


def test_round_trip_preserves_overrides():
    doc = dict(FULL_DOC, prach={"num_preambles": 7},
               phy={"snr_threshold_db": -1000.0})
    cfg = config_from_dict(doc)
    again = load_config(serialize(cfg))
    assert again.prach.num_preambles == 7
    assert again.phy.snr_threshold_db == -1000.0
    assert again == cfg


def test_apply_override_dotted_paths():
    doc = dict(FULL_DOC)
    apply_override(doc, "phy.cces_per_subframe", "4")
    apply_override(doc, "num_mtds", "123")
    cfg = config_from_dict(doc)
    assert cfg.phy.cces_per_subframe == 4
    assert cfg.num_mtds == 123


def test_derive_run_seed_deterministic_and_injective():
    assert derive_run_seed(7, 3) == derive_run_seed(7, 3)
    assert derive_run_seed(7, 0) != derive_run_seed(7, 1)
    assert derive_run_seed(7, 3) != derive_run_seed(8, 3)


def test_derive_run_seed_collision_free_over_grid():
    # brute-force uniqueness over 10^4 (master, repetition) pairs
    seen = {derive_run_seed(master, rep)
            for master in range(100) for rep in range(100)}
    assert len(seen) == 10_000


def test_derive_run_seed_rejects_negative_repetition():
    with pytest.raises(ValueError):
        derive_run_seed(1, -1)


def test_config_is_json_compatible():
    cfg = config_from_dict(FULL_DOC)
    json.loads(serialize(cfg))  # must not raise
