"""Command-line sweep harness.

Either start from a preset (fig3a, fig3b, fig3c, fig5, fig6) or from a
config file, then override anything with --set. The four sweep axes accept
comma lists: --set m=1000,5000 --set n=1,2,5 --set b=1,10
--set lambda_per_min=1. Other --set keys are dotted config paths, e.g.
--set phy.cces_per_subframe=4. Outputs raw.csv and aggregate.csv in --out.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, ScenarioConfig, apply_override, config_from_dict, load_config
from .engine import export_packets_csv, export_trace_csv, run
from .spatial import deploy, export_topology_csv
from .sweep import PRESET_NAMES, SweepSpec, iter_run_descriptors, preset, run_sweep

AXIS_KEYS = ("m", "n", "b", "lambda_per_min")


def _parse_axis(value: str, cast):
    return [cast(part) for part in str(value).split(",") if part != ""]


def build_spec(args) -> SweepSpec:
    axis_overrides = {}
    config_overrides = []
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(item, "--set expects key=value")
        key, value = item.split("=", 1)
        if key in AXIS_KEYS:
            axis_overrides[key] = value
        else:
            config_overrides.append((key, value))

    if args.preset:
        spec = preset(args.preset, repetitions=args.reps, master_seed=args.seed)
    else:
        if args.config:
            base = load_config(Path(args.config).read_text())
        else:
            raise ConfigError("--preset/--config", "one of them is required")
        base = base.replace(engine={"master_seed": args.seed,
                                    "num_repetitions": args.reps})
        spec = SweepSpec(base, m_values=[base.num_mtds],
                         n_values=[base.num_aggregators],
                         b_values=[base.bundle_limit],
                         lambda_values=[base.packet_rate_lambda_app],
                         repetitions=args.reps)

    if config_overrides:
        doc = spec.base.to_dict()
        for key, value in config_overrides:
            apply_override(doc, key, value)
        spec.base = config_from_dict(doc)
    if "m" in axis_overrides:
        spec.m_values = _parse_axis(axis_overrides["m"], int)
    if "n" in axis_overrides:
        spec.n_values = _parse_axis(axis_overrides["n"], int)
    if "b" in axis_overrides:
        spec.b_values = _parse_axis(axis_overrides["b"], int)
    if "lambda_per_min" in axis_overrides:
        per_min = _parse_axis(axis_overrides["lambda_per_min"], float)
        spec.lambda_values = [v / 60.0 for v in per_min]
    spec.out_dir = Path(args.out)
    return spec


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="aggsim",
        description="Uplink MTC aggregation/bundling sweep harness")
    parser.add_argument("--config", help="base config JSON file")
    parser.add_argument("--preset", choices=PRESET_NAMES,
                        help="named experiment preset")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config field or sweep axis (m, n, b, "
                             "lambda_per_min accept comma lists)")
    parser.add_argument("--reps", type=int, default=10,
                        help="repetitions per grid point (default 10)")
    parser.add_argument("--seed", type=int, default=1, help="master seed")
    parser.add_argument("--workers", type=int, default=1,
                        help="parallel worker processes")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--topology", action="store_true",
                        help="export topology.csv for the first grid point")
    parser.add_argument("--trace", action="store_true",
                        help="export trace.csv of the first run (message log)")
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    log = (lambda msg: None) if args.quiet else lambda msg: print(msg, flush=True)
    try:
        spec = build_spec(args)
        run_sweep(spec, workers=max(1, args.workers), log=log)
        first = next(iter_run_descriptors(spec), None)
        if first is not None and (args.topology or args.trace):
            _, config, seed, _, _ = first
            out = Path(args.out)
            if args.topology:
                export_topology_csv(deploy(config, seed), out / "topology.csv")
                log(f"wrote {out / 'topology.csv'}")
            if args.trace:
                trace = []
                result = run(config, seed, trace=trace)
                export_trace_csv(trace, out / "trace.csv")
                export_packets_csv(result, out / "packets.csv")
                log(f"wrote {out / 'trace.csv'} and {out / 'packets.csv'}")
        log(f"wrote {Path(args.out) / 'raw.csv'} and {Path(args.out) / 'aggregate.csv'}")
    except (ConfigError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
