import csv
import json
from pathlib import Path

import pytest

from aggsim.cli import main
from aggsim.config import ScenarioConfig
from aggsim.metrics import mean_ci
from aggsim.sweep import (
    AGG_COLUMNS,
    RAW_COLUMNS,
    SweepSpec,
    aggregate_rows,
    preset,
    run_sweep,
)

TINY = ["--set", "sim_length_s=2", "--set", "m=20", "--quiet"]


def make_base(**kw):
    doc = dict(num_mtds=20, num_aggregators=2, packet_rate_lambda_app=0.5,
               bundle_limit=10, sim_length_s=2.0)
    doc.update(kw)
    return ScenarioConfig(**doc)


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_single_point_single_rep(tmp_path):
    spec = SweepSpec(make_base(), m_values=[20], n_values=[2], b_values=[10],
                     lambda_values=[0.5], repetitions=1, out_dir=tmp_path)
    raw, agg = run_sweep(spec)
    assert len(raw) == 1 and len(agg) == 1
    assert read(tmp_path / "raw.csv") and read(tmp_path / "aggregate.csv")


def test_grid_row_counts(tmp_path):
    spec = SweepSpec(make_base(), m_values=[20], n_values=[0, 1, 10],
                     b_values=[10], lambda_values=[0.5], repetitions=5,
                     out_dir=tmp_path)
    raw, agg = run_sweep(spec)
    assert len(raw) == 15 and len(agg) == 3
    rows = read(tmp_path / "raw.csv")
    assert [r["n"] for r in rows] == ["0"] * 5 + ["1"] * 5 + ["10"] * 5
    assert [r["repetition"] for r in rows[:5]] == ["0", "1", "2", "3", "4"]


def test_sweep_outputs_are_byte_identical(tmp_path):
    for sub in ("a", "b"):
        spec = SweepSpec(make_base(), m_values=[20], n_values=[1, 3],
                         b_values=[1, 10], lambda_values=[0.5],
                         repetitions=2, out_dir=tmp_path / sub)
        run_sweep(spec)
    for name in ("raw.csv", "aggregate.csv"):
        assert (tmp_path / "a" / name).read_bytes() == \
               (tmp_path / "b" / name).read_bytes()


def test_csv_schema(tmp_path):
    spec = SweepSpec(make_base(), m_values=[20], n_values=[2], b_values=[10],
                     lambda_values=[0.5], repetitions=2, out_dir=tmp_path)
    run_sweep(spec)
    raw_header = (tmp_path / "raw.csv").read_text().splitlines()[0].split(",")
    agg_header = (tmp_path / "aggregate.csv").read_text().splitlines()[0].split(",")
    assert raw_header == RAW_COLUMNS
    assert agg_header == AGG_COLUMNS
    for row in read(tmp_path / "raw.csv"):
        assert float(row["throughput_bps"]) >= 0.0
        assert 0.0 <= float(row["outage_fraction"]) <= 1.0


def test_aggregate_equals_recomputation_from_raw():
    spec = SweepSpec(make_base(), m_values=[20], n_values=[1, 2], b_values=[10],
                     lambda_values=[0.5], repetitions=4)
    raw, agg = run_sweep(spec)
    again = aggregate_rows(raw)
    assert agg == again
    by_n = {row["n"]: row for row in agg}
    for n in (1, 2):
        values = [r["throughput_bps"] for r in raw if r["n"] == n]
        mean, half = mean_ci(values)
        assert by_n[n]["throughput_bps_mean"] == pytest.approx(mean)
        assert by_n[n]["throughput_bps_ci95"] == pytest.approx(half)


def test_seeds_shared_across_bundle_limits():
    spec = SweepSpec(make_base(), m_values=[20], n_values=[2], b_values=[1, 10],
                     lambda_values=[0.5], repetitions=2)
    raw, _ = run_sweep(spec)
    seeds_b1 = [r["seed"] for r in raw if r["bundle_limit"] == 1]
    seeds_b10 = [r["seed"] for r in raw if r["bundle_limit"] == 10]
    assert seeds_b1 == seeds_b10
    assert len(set(seeds_b1)) == 2


def test_preset_fig3c_definition():
    spec = preset("fig3c", repetitions=3)
    assert spec.m_values == [5000]
    assert spec.b_values == [1, 2, 5, 10]
    assert spec.lambda_values == [pytest.approx(3 / 60)]
    assert spec.n_values[0] == 0 and 1 in spec.n_values and 500 in spec.n_values
    assert spec.repetitions == 3


def test_preset_fig5_and_fig6_definitions():
    fig5 = preset("fig5")
    assert fig5.m_values == [1000, 3000, 5000]
    assert fig5.b_values == [1, 10]
    fig6 = preset("fig6")
    assert fig6.m_values == [5000] and fig6.b_values == [10]
    assert 0 not in fig6.n_values


def test_unknown_preset_rejected():
    with pytest.raises(ValueError):
        preset("fig9")


def test_cli_end_to_end(tmp_path):
    out = tmp_path / "results"
    code = main(["--preset", "fig3a", "--reps", "1", "--seed", "3",
                 "--out", str(out), "--set", "n=1,2", "--set", "m=30",
                 "--set", "sim_length_s=2", "--quiet", "--topology", "--trace"])
    assert code == 0
    assert (out / "raw.csv").exists()
    assert (out / "aggregate.csv").exists()
    assert (out / "topology.csv").exists()
    assert (out / "trace.csv").exists()
    rows = read(out / "raw.csv")
    assert len(rows) == 2
    assert {r["m"] for r in rows} == {"30"}


def test_cli_lambda_per_minute_conversion(tmp_path):
    out = tmp_path / "r"
    code = main(["--preset", "fig3a", "--reps", "1", "--out", str(out),
                 "--set", "n=1", "--set", "m=10", "--set", "lambda_per_min=3",
                 "--set", "sim_length_s=2", "--quiet"])
    assert code == 0
    row = read(out / "raw.csv")[0]
    assert float(row["lambda_per_min"]) == pytest.approx(3.0)


def test_cli_config_file(tmp_path):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps({
        "num_mtds": 15, "num_aggregators": 2,
        "packet_rate_lambda_app": 0.5, "bundle_limit": 5,
        "sim_length_s": 2.0,
    }))
    out = tmp_path / "out"
    code = main(["--config", str(cfg_path), "--reps", "2", "--out", str(out),
                 "--quiet"])
    assert code == 0
    rows = read(out / "raw.csv")
    assert len(rows) == 2 and rows[0]["bundle_limit"] == "5"


def test_cli_errors_return_nonzero(tmp_path, capsys):
    assert main(["--out", str(tmp_path)]) == 1          # neither preset nor config
    assert "error" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{broken")
    assert main(["--config", str(bad), "--out", str(tmp_path), "--quiet"]) == 1
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"num_mtds": 5, "num_aggregators": 1,
                               "packet_rate_lambda_app": 0.1, "bundle_limit": 0}))
    assert main(["--config", str(cfg), "--out", str(tmp_path), "--quiet"]) == 1


def test_cli_set_overrides_config_fields(tmp_path):
    out = tmp_path / "x"
    code = main(["--preset", "fig3a", "--reps", "1", "--out", str(out),
                 "--set", "n=1", "--set", "m=10", "--set", "sim_length_s=2",
                 "--set", "phy.cces_per_subframe=2",
                 "--set", "prach.num_preambles=11", "--quiet"])
    assert code == 0
    assert (out / "raw.csv").exists()
