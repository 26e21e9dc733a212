"""Batch experiment harness: repetition sweeps over (M, N, B, lambda) grids
with CSV output, plus the named presets behind the reference experiments.

Run seeds derive from (master seed, grid index, repetition) but not from
the bundle limit, so B variants of the same point share placement and
arrivals and can be compared pairwise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from multiprocessing import Pool
from pathlib import Path

from .config import ScenarioConfig, config_from_dict, derive_run_seed
from .engine import run
from .metrics import mean_ci, summarize

N_GRID_FULL = [1, 2, 5, 10, 20, 50, 100, 200, 500]
N_GRID_SMALL = [1, 2, 5, 10, 20, 50]

AXIS_COLUMNS = ["m", "n", "bundle_limit", "lambda_per_min"]

_SUMMARY_COLUMNS = [
    "throughput_bps", "mean_latency_ms", "median_latency_ms", "p95_latency_ms",
    "outage_fraction", "tx_error", "pdcch_starvation", "pusch_starvation",
    "pdsch_starvation", "preamble_collisions", "per_aggregator_throughput_bps",
    "generated", "delivered", "dropped_ra", "dropped_harq", "undelivered_at_end",
]

RAW_COLUMNS = AXIS_COLUMNS + ["repetition", "seed"] + _SUMMARY_COLUMNS

_MEAN_CI_COLUMNS = [
    "throughput_bps", "mean_latency_ms", "p95_latency_ms",
    "outage_fraction", "per_aggregator_throughput_bps",
]
_MEAN_ONLY_COLUMNS = [
    "tx_error", "pdcch_starvation", "pusch_starvation", "pdsch_starvation",
    "preamble_collisions", "generated", "delivered",
]

AGG_COLUMNS = (AXIS_COLUMNS + ["repetitions"]
               + [f"{c}_mean" for c in _MEAN_CI_COLUMNS]
               + [f"{c}_ci95" for c in _MEAN_CI_COLUMNS]
               + [f"{c}_mean" for c in _MEAN_ONLY_COLUMNS])


@dataclass
class SweepSpec:
    base: ScenarioConfig
    m_values: list[int]
    n_values: list[int]
    b_values: list[int]
    lambda_values: list[float]          # packets per second
    repetitions: int = 10
    out_dir: Path | None = None

    def num_runs(self) -> int:
        return (len(self.m_values) * len(self.n_values) * len(self.b_values)
                * len(self.lambda_values) * self.repetitions)

    def point_config(self, m, n, b, lam) -> ScenarioConfig:
        return self.base.replace(num_mtds=m, num_aggregators=n,
                                 bundle_limit=b, packet_rate_lambda_app=lam)


def _seed_for(spec: SweepSpec, m_i, n_i, lam_i, rep) -> int:
    k = ((m_i * len(spec.n_values) + n_i) * len(spec.lambda_values) + lam_i)
    return derive_run_seed(spec.base.engine.master_seed,
                           k * spec.repetitions + rep)


def iter_run_descriptors(spec: SweepSpec):
    """(index, config, seed, axes dict, repetition) in output row order."""
    index = 0
    for m_i, m in enumerate(spec.m_values):
        for n_i, n in enumerate(spec.n_values):
            for b in spec.b_values:
                for lam_i, lam in enumerate(spec.lambda_values):
                    for rep in range(spec.repetitions):
                        axes = {"m": m, "n": n, "bundle_limit": b,
                                "lambda_per_min": lam * 60.0}
                        yield (index, spec.point_config(m, n, b, lam),
                               _seed_for(spec, m_i, n_i, lam_i, rep), axes, rep)
                        index += 1


def _execute(descriptor):
    index, config_doc, seed, axes, rep = descriptor
    config = config_from_dict(config_doc)
    summary = summarize(run(config, seed))
    row = dict(axes)
    row["repetition"] = rep
    row["seed"] = seed
    row.update(asdict(summary))
    return index, row


def run_sweep(spec: SweepSpec, workers: int = 1, log=None):
    """Execute every (grid point, repetition); returns (raw_rows, agg_rows)
    and writes raw.csv/aggregate.csv when out_dir is set."""
    descriptors = [(i, cfg.to_dict(), seed, axes, rep)
                   for i, cfg, seed, axes, rep in iter_run_descriptors(spec)]
    if log:
        log(f"sweep: {spec.num_runs()} runs "
            f"({spec.num_runs() // max(1, spec.repetitions)} grid points "
            f"x {spec.repetitions} repetitions)")
    every = 1 if len(descriptors) <= 50 else 25
    results = {}
    if workers > 1:
        with Pool(workers) as pool:
            for index, row in pool.imap_unordered(_execute, descriptors):
                results[index] = row
                if log and len(results) % every == 0:
                    log(f"  run {len(results)}/{len(descriptors)} done")
    else:
        for descriptor in descriptors:
            index, row = _execute(descriptor)
            results[index] = row
            if log and len(results) % every == 0:
                log(f"  run {len(results)}/{len(descriptors)} done")
    raw_rows = [results[i] for i in range(len(descriptors))]
    agg_rows = aggregate_rows(raw_rows)
    if spec.out_dir is not None:
        out = Path(spec.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "raw.csv", RAW_COLUMNS, raw_rows)
        write_csv(out / "aggregate.csv", AGG_COLUMNS, agg_rows)
    return raw_rows, agg_rows


def aggregate_rows(raw_rows) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for row in raw_rows:
        key = tuple(row[c] for c in AXIS_COLUMNS)
        groups.setdefault(key, []).append(row)
    agg = []
    for key, rows in groups.items():
        out = dict(zip(AXIS_COLUMNS, key))
        out["repetitions"] = len(rows)
        for col in _MEAN_CI_COLUMNS:
            values = [r[col] for r in rows if not math.isnan(r[col])]
            mean, half = mean_ci(values) if values else (math.nan, math.nan)
            out[f"{col}_mean"] = mean
            out[f"{col}_ci95"] = half
        for col in _MEAN_ONLY_COLUMNS:
            out[f"{col}_mean"] = float(sum(r[col] for r in rows)) / len(rows)
        agg.append(out)
    return agg


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row[c] for c in columns})


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


PRESET_NAMES = ("fig3a", "fig3b", "fig3c", "fig5", "fig6")


def preset(name: str, repetitions: int = 10, master_seed: int = 1,
           out_dir=None) -> SweepSpec:
    """Sweeps matching the reference experiments. The aggregator grids are
    log-spaced; the direct-access benchmark (n=0) is included where the
    corresponding figure shows it."""
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset {name!r} (choose from {PRESET_NAMES})")
    per_min = 1.0 / 60.0
    base = ScenarioConfig(num_mtds=5000, num_aggregators=1,
                          packet_rate_lambda_app=per_min, bundle_limit=10)
    base = base.replace(engine={"master_seed": master_seed,
                                "num_repetitions": repetitions})
    spec = {
        "fig3a": SweepSpec(base, m_values=[1000, 3000, 5000],
                           n_values=[0] + N_GRID_FULL, b_values=[10],
                           lambda_values=[per_min]),
        "fig3b": SweepSpec(base, m_values=[5000],
                           n_values=[0] + N_GRID_FULL, b_values=[1, 10],
                           lambda_values=[per_min]),
        "fig3c": SweepSpec(base, m_values=[5000],
                           n_values=[0] + N_GRID_FULL, b_values=[1, 2, 5, 10],
                           lambda_values=[3.0 / 60.0]),
        "fig5": SweepSpec(base, m_values=[1000, 3000, 5000],
                          n_values=[0] + N_GRID_SMALL, b_values=[1, 10],
                          lambda_values=[per_min]),
        "fig6": SweepSpec(base, m_values=[5000], n_values=N_GRID_FULL,
                          b_values=[10], lambda_values=[per_min]),
    }[name]
    spec.repetitions = repetitions
    spec.out_dir = Path(out_dir) if out_dir is not None else None
    return spec
