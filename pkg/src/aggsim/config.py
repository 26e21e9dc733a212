"""Experiment configuration: every tunable of the simulator plus validation
and JSON (de)serialization.

Required fields are the swept quantities: num_mtds, num_aggregators,
packet_rate_lambda_app and bundle_limit. Everything else has a default.
Rates are packets/second internally; the CLI converts from packets/minute.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields


class ConfigError(ValueError):
    """Validation or parse failure; `field` names the offending entry."""

    def __init__(self, field_name, message):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class PrachParams:
    num_preambles: int = 54
    rao_period_subframes: int = 10
    backoff_subframes: int = 20          # uniform draw in [0, backoff]
    max_ra_attempts_per_payload: int = 10
    preamble_trans_max: int = 10


@dataclass(frozen=True)
class RrcParams:
    idle_timeout_ms: int = 100
    post_msg4_signalling_msgs: int = 6
    # RRC setup signalling after msg4 normally consumes CCE/RB resources;
    # switch off to model it as free.
    signalling_consumes_resources: bool = True


@dataclass(frozen=True)
class HarqParams:
    max_data_retransmissions: int = 1


@dataclass(frozen=True)
class PhyParams:
    dl_tx_power_dbm: float = 30.0
    ul_tx_power_dbm: float = 23.0
    tbs_bits_per_rb: int = 296           # fixed modulation, one RB per subframe
    ul_rbs_per_subframe: int = 6
    dl_rbs_per_subframe: int = 6
    cces_per_subframe: int = 6
    pathloss_model: str = "log_distance_macro"
    pathloss_min_distance_m: float = 35.0
    noise_figure_db: float = 5.0
    # Calibrated so an uplink at the 1000 m cell edge fails ~10% of the time.
    snr_threshold_db: float = 1.6
    earfcn_dl: int = 5900                # documentation only, not used in math


@dataclass(frozen=True)
class TimingParams:
    processing_time_ms: int = 3
    subframe_ms: int = 1
    fragmentation_threshold_rbs: int = 6
    ra_msg_deadline_subframes: int = 10
    data_deadline_subframes: int = 100
    contention_resolution_timeout_subframes: int = 10


@dataclass(frozen=True)
class EngineParams:
    master_seed: int = 1
    num_repetitions: int = 1


@dataclass(frozen=True)
class ScenarioConfig:
    num_mtds: int
    num_aggregators: int
    packet_rate_lambda_app: float        # packets per second per MTD
    bundle_limit: int
    cell_radius_m: float = 1000.0
    packet_size_bytes: int = 100
    sim_length_s: float = 60.0
    prach: PrachParams = field(default_factory=PrachParams)
    rrc: RrcParams = field(default_factory=RrcParams)
    harq: HarqParams = field(default_factory=HarqParams)
    phy: PhyParams = field(default_factory=PhyParams)
    timing: TimingParams = field(default_factory=TimingParams)
    engine: EngineParams = field(default_factory=EngineParams)

    def __post_init__(self):
        validate(self)

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **top_level) -> "ScenarioConfig":
        d = self.to_dict()
        d.update(top_level)
        return config_from_dict(d)


REQUIRED_FIELDS = ("num_mtds", "num_aggregators", "packet_rate_lambda_app", "bundle_limit")

_GROUP_TYPES = {
    "prach": PrachParams,
    "rrc": RrcParams,
    "harq": HarqParams,
    "phy": PhyParams,
    "timing": TimingParams,
    "engine": EngineParams,
}


def _check(cond, field_name, message):
    if not cond:
        raise ConfigError(field_name, message)


def validate(cfg: ScenarioConfig) -> None:
    _check(cfg.num_mtds >= 0, "num_mtds", "must be >= 0")
    _check(cfg.num_aggregators >= 0, "num_aggregators", "must be >= 0")
    _check(cfg.packet_rate_lambda_app >= 0, "packet_rate_lambda_app", "must be >= 0")
    _check(cfg.bundle_limit >= 1, "bundle_limit", "must be >= 1")
    _check(cfg.cell_radius_m > 0, "cell_radius_m", "must be > 0")
    _check(cfg.sim_length_s > 0, "sim_length_s", "must be > 0")
    _check(cfg.packet_size_bytes >= 1, "packet_size_bytes", "must be >= 1")

    p = cfg.prach
    _check(p.num_preambles >= 1, "prach.num_preambles", "must be >= 1")
    _check(p.rao_period_subframes >= 1, "prach.rao_period_subframes", "must be >= 1")
    _check(p.backoff_subframes >= 0, "prach.backoff_subframes", "must be >= 0")
    _check(p.max_ra_attempts_per_payload >= 1, "prach.max_ra_attempts_per_payload", "must be >= 1")
    _check(p.preamble_trans_max >= 1, "prach.preamble_trans_max", "must be >= 1")

    _check(cfg.rrc.idle_timeout_ms >= 0, "rrc.idle_timeout_ms", "must be >= 0")
    _check(cfg.rrc.post_msg4_signalling_msgs >= 0, "rrc.post_msg4_signalling_msgs", "must be >= 0")
    _check(cfg.harq.max_data_retransmissions >= 0, "harq.max_data_retransmissions", "must be >= 0")

    phy = cfg.phy
    _check(phy.tbs_bits_per_rb >= 1, "phy.tbs_bits_per_rb", "must be >= 1")
    _check(phy.ul_rbs_per_subframe >= 1, "phy.ul_rbs_per_subframe", "must be >= 1")
    _check(phy.dl_rbs_per_subframe >= 1, "phy.dl_rbs_per_subframe", "must be >= 1")
    _check(phy.cces_per_subframe >= 1, "phy.cces_per_subframe", "must be >= 1")
    _check(phy.pathloss_model == "log_distance_macro", "phy.pathloss_model",
           "unknown model (supported: log_distance_macro)")
    _check(phy.pathloss_min_distance_m > 0, "phy.pathloss_min_distance_m", "must be > 0")

    t = cfg.timing
    _check(t.processing_time_ms >= 0, "timing.processing_time_ms", "must be >= 0")
    _check(t.subframe_ms == 1, "timing.subframe_ms", "only 1 ms subframes are supported")
    _check(t.fragmentation_threshold_rbs >= 1, "timing.fragmentation_threshold_rbs", "must be >= 1")
    _check(t.fragmentation_threshold_rbs <= phy.ul_rbs_per_subframe,
           "timing.fragmentation_threshold_rbs", "must be <= phy.ul_rbs_per_subframe")
    _check(t.ra_msg_deadline_subframes >= 1, "timing.ra_msg_deadline_subframes", "must be >= 1")
    _check(t.data_deadline_subframes >= 1, "timing.data_deadline_subframes", "must be >= 1")
    _check(t.contention_resolution_timeout_subframes >= 0,
           "timing.contention_resolution_timeout_subframes", "must be >= 0")

    e = cfg.engine
    _check(e.master_seed >= 0, "engine.master_seed", "must be >= 0")
    _check(e.num_repetitions >= 1, "engine.num_repetitions", "must be >= 1")


def _build_group(name, cls, data):
    if not isinstance(data, dict):
        raise ConfigError(name, "must be an object")
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{name}.{key}", "unknown field")
    return cls(**data)


def config_from_dict(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "top level must be an object")
    missing = [name for name in REQUIRED_FIELDS if name not in doc]
    if missing:
        raise ConfigError(", ".join(missing), "required field(s) missing")
    top = {f.name for f in fields(ScenarioConfig)}
    kwargs = {}
    for key, value in doc.items():
        if key not in top:
            raise ConfigError(key, "unknown field")
        if key in _GROUP_TYPES:
            kwargs[key] = _build_group(key, _GROUP_TYPES[key], value)
        else:
            kwargs[key] = value
    return ScenarioConfig(**kwargs)


def load_config(text: str) -> ScenarioConfig:
    """Parse a JSON document into a validated ScenarioConfig."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError("<document>", f"malformed JSON: {err}") from err
    return config_from_dict(doc)


def serialize(cfg: ScenarioConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)


def apply_override(doc: dict, dotted_key: str, raw_value: str) -> None:
    """Set `a.b.c=value` style overrides on a config dict, parsing the value
    as JSON when possible and falling back to a plain string."""
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    parts = dotted_key.split(".")
    node = doc
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(dotted_key, "path traverses a non-object field")
    node[parts[-1]] = value


def derive_run_seed(master_seed: int, repetition_index: int) -> int:
    """Stable per-repetition seed; distinct across repetitions and masters."""
    if repetition_index < 0:
        raise ValueError("repetition_index must be >= 0")
    digest = hashlib.sha256(f"{master_seed}:{repetition_index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")
