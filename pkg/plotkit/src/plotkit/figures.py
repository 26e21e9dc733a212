"""Render sweep results to figures.

Three kinds:
  curves        - metric vs. aggregator count, one line per group value;
                  n=0 rows become horizontal benchmark reference lines.
  optimal_bars  - per device count: bars of the throughput-optimal
                  aggregator count, lines of the optimal throughput
                  (dual axis), one pair per group value.
  incident_bars - stacked starvation/error incident counts vs. n.

render() writes the image and returns the plotted series so callers and
tests can verify exactly what went on the canvas.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .schema import INCIDENT_COLUMNS, SchemaError, ci_column_for, load_aggregate

KINDS = ("curves", "optimal_bars", "incident_bars")


@dataclass
class FigureSpec:
    kind: str
    input_csv: Path
    output_image: Path
    group_column: str | None = None
    x_column: str = "n"
    y_column: str = "throughput_bps_mean"
    log_x: bool = False


def render(spec: FigureSpec) -> dict:
    if spec.kind not in KINDS:
        raise SchemaError("kind", f"unknown figure kind {spec.kind!r} "
                                  f"(choose from {KINDS})")
    builder = {"curves": _curves, "optimal_bars": _optimal_bars,
               "incident_bars": _incident_bars}[spec.kind]
    fig, series = builder(spec)
    out = Path(spec.output_image)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return series


def _groups(frame, spec):
    if spec.group_column is None:
        return [(None, frame)]
    if spec.group_column not in frame.columns:
        raise SchemaError(spec.group_column, "group column missing from CSV")
    return [(value, frame[frame[spec.group_column] == value])
            for value in sorted(frame[spec.group_column].unique())]


def _curves(spec):
    frame = load_aggregate(spec.input_csv, [spec.x_column, spec.y_column])
    ci_col = ci_column_for(spec.y_column)
    has_ci = ci_col in frame.columns if ci_col else False
    fig, ax = plt.subplots(figsize=(7, 4.5))
    series = {}
    for value, block in _groups(frame, spec):
        label = "all" if value is None else f"{spec.group_column}={value}"
        main = block[block[spec.x_column] > 0].sort_values(spec.x_column)
        bench = block[block[spec.x_column] == 0]
        if len(main) == 0 and len(bench) == 0:
            raise SchemaError(spec.group_column or spec.x_column,
                              f"empty selection for {label}")
        x = main[spec.x_column].tolist()
        y = main[spec.y_column].tolist()
        if x:
            if has_ci:
                ax.errorbar(x, y, yerr=main[ci_col].tolist(), marker="o",
                            capsize=3, label=label)
            else:
                ax.plot(x, y, marker="o", label=label)
        if len(bench):
            level = float(bench[spec.y_column].iloc[0])
            ax.axhline(level, linestyle="--", alpha=0.6,
                       label=f"{label} benchmark (n=0)")
            series[f"{label}/benchmark"] = [level]
        series[label] = list(zip(x, y))
    if spec.log_x:
        ax.set_xscale("log")
    ax.set_xlabel(spec.x_column)
    ax.set_ylabel(spec.y_column)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return fig, series


def _optimal_bars(spec):
    needed = ["m", "n", "bundle_limit", "throughput_bps_mean"]
    frame = load_aggregate(spec.input_csv, needed)
    group_col = spec.group_column or "bundle_limit"
    if group_col not in frame.columns:
        raise SchemaError(group_col, "group column missing from CSV")
    fig, ax_bars = plt.subplots(figsize=(7, 4.5))
    ax_lines = ax_bars.twinx()
    series = {}
    groups = sorted(frame[group_col].unique())
    m_values = sorted(frame["m"].unique())
    width = 0.8 / max(1, len(groups))
    for gi, value in enumerate(groups):
        block = frame[(frame[group_col] == value) & (frame["n"] > 0)]
        if len(block) == 0:
            raise SchemaError(group_col, f"empty selection for {group_col}={value}")
        n_star, t_star = [], []
        for m in m_values:
            per_m = block[block["m"] == m]
            if len(per_m) == 0:
                raise SchemaError("m", f"no rows for m={m}, {group_col}={value}")
            best = per_m.loc[per_m["throughput_bps_mean"].idxmax()]
            n_star.append(int(best["n"]))
            t_star.append(float(best["throughput_bps_mean"]))
        offsets = [i + (gi - (len(groups) - 1) / 2) * width
                   for i in range(len(m_values))]
        label = f"{group_col}={value}"
        ax_bars.bar(offsets, n_star, width=width, alpha=0.5,
                    label=f"optimal n ({label})")
        ax_lines.plot(range(len(m_values)), t_star, marker="s",
                      label=f"optimal throughput ({label})")
        series[label] = list(zip(m_values, n_star, t_star))
    bench = frame[frame["n"] == 0]
    if len(bench):
        bench_y = [float(bench[bench["m"] == m]["throughput_bps_mean"].iloc[0])
                   for m in m_values if len(bench[bench["m"] == m])]
        if bench_y:
            ax_lines.plot(range(len(bench_y)), bench_y, linestyle="--",
                          label="benchmark (n=0)")
            series["benchmark"] = bench_y
    ax_bars.set_xticks(range(len(m_values)))
    ax_bars.set_xticklabels([str(m) for m in m_values])
    ax_bars.set_xlabel("m")
    ax_bars.set_ylabel("optimal number of aggregators")
    ax_lines.set_ylabel("optimal throughput [bps]")
    ax_bars.legend(loc="upper left", fontsize=8)
    ax_lines.legend(loc="upper right", fontsize=8)
    return fig, series


def _incident_bars(spec):
    frame = load_aggregate(spec.input_csv, ["n"] + INCIDENT_COLUMNS)
    if spec.group_column is not None:
        raise SchemaError("group_column", "incident_bars does not take a group")
    if frame["n"].duplicated().any():
        raise SchemaError("n", "ambiguous selection: multiple rows per n "
                               "(filter the CSV to one grid slice)")
    frame = frame.sort_values("n")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    x = range(len(frame))
    bottom = [0.0] * len(frame)
    series = {"n": frame["n"].tolist()}
    for column in INCIDENT_COLUMNS:
        values = frame[column].tolist()
        ax.bar(x, values, bottom=bottom, label=column.replace("_mean", ""))
        bottom = [b + v for b, v in zip(bottom, values)]
        series[column] = values
    ax.set_xticks(list(x))
    ax.set_xticklabels([str(int(n)) for n in frame["n"]])
    ax.set_xlabel("number of aggregators")
    ax.set_ylabel("incidents per run")
    ax.legend(fontsize=8)
    return fig, series
