"""Node deployment and MTD-to-aggregator association.

MTDs and aggregators are dropped uniformly at random on the cell disk
(binomial point process: exact counts, uniform-in-area positions) and each
MTD attaches to its nearest aggregator, ties to the lowest index. The
analytical density of aggregators serving at least one MTD is also here.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig


@dataclass(frozen=True)
class Topology:
    mtd_xy: np.ndarray          # (M, 2) meters, cell-centered
    aggregator_xy: np.ndarray   # (N, 2) meters
    association: np.ndarray | None   # (M,) aggregator index, None when N == 0
    bs_xy: tuple[float, float] = (0.0, 0.0)

    @property
    def num_mtds(self) -> int:
        return len(self.mtd_xy)

    @property
    def num_aggregators(self) -> int:
        return len(self.aggregator_xy)


def _uniform_disk(rng, count, radius):
    # Inverse-CDF radial sampling keeps the density uniform in area.
    r = radius * np.sqrt(rng.random(count))
    theta = rng.random(count) * (2.0 * np.pi)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def deploy(config: ScenarioConfig, seed) -> Topology:
    """Place MTDs then aggregators, then associate. Deterministic per seed;
    `seed` may be an int or an existing numpy Generator."""
    rng = np.random.default_rng(seed)
    mtd_xy = _uniform_disk(rng, config.num_mtds, config.cell_radius_m)
    agg_xy = _uniform_disk(rng, config.num_aggregators, config.cell_radius_m)
    assoc = associate(mtd_xy, agg_xy) if config.num_aggregators >= 1 else None
    return Topology(mtd_xy=mtd_xy, aggregator_xy=agg_xy, association=assoc)


def associate(mtd_xy: np.ndarray, aggregator_xy: np.ndarray) -> np.ndarray:
    """Nearest aggregator per MTD (squared Euclidean); ties break to the
    lowest aggregator index via argmin's first-occurrence rule."""
    if len(aggregator_xy) == 0:
        raise ValueError("association requires at least one aggregator")
    m = len(mtd_xy)
    out = np.empty(m, dtype=np.int64)
    # Chunked to bound the (chunk x N) distance matrix.
    chunk = max(1, min(m, 2_000_000 // max(1, len(aggregator_xy))))
    for start in range(0, m, chunk):
        block = mtd_xy[start:start + chunk]
        d2 = ((block[:, None, :] - aggregator_xy[None, :, :]) ** 2).sum(axis=2)
        out[start:start + chunk] = np.argmin(d2, axis=1)
    return out


def active_aggregator_density(lambda_a: float, lambda_u: float) -> float:
    """Density of aggregators serving at least one MTD, for independent
    uniform deployments with intensities lambda_a and lambda_u (nodes/m^2)."""
    if lambda_a <= 0:
        raise ValueError("lambda_a must be > 0")
    if lambda_u < 0:
        raise ValueError("lambda_u must be >= 0")
    return lambda_a * (1.0 - (1.0 + lambda_u / (3.5 * lambda_a)) ** -3.5)


def empirical_active_fraction(topology: Topology) -> float:
    """Fraction of aggregators with at least one associated MTD."""
    n = topology.num_aggregators
    if n == 0:
        raise ValueError("no aggregators deployed")
    if topology.num_mtds == 0:
        return 0.0
    served = np.bincount(topology.association, minlength=n) > 0
    return float(served.sum()) / n


def export_topology_csv(topology: Topology, path) -> None:
    """node id, role, x, y, associated aggregator (empty for aggregators/BS)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node_id", "role", "x_m", "y_m", "aggregator"])
        writer.writerow(["bs", "bs", 0.0, 0.0, ""])
        for i, (x, y) in enumerate(topology.aggregator_xy):
            writer.writerow([f"agg{i}", "aggregator", float(x), float(y), ""])
        for i, (x, y) in enumerate(topology.mtd_xy):
            assoc = "" if topology.association is None else int(topology.association[i])
            writer.writerow([f"mtd{i}", "mtd", float(x), float(y), assoc])
