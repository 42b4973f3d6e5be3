"""
Brute-force distance oracle and field accuracy benchmark.

The oracle is the exact nearest-sample distance. The benchmark samples a
grid, keeps nodes whose oracle distance lies in a band, and compares the
field against the oracle there.
"""

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
from scipy.spatial import KDTree

from gpfield.core.mesher import GridSpec
from gpfield.utils.pointcloud import format_float

logger = logging.getLogger(__name__)

CSV_HEADER = ("qx", "qy", "qz", "d_field", "d_oracle", "abs_err")


def _cloud_points(cloud) -> np.ndarray:
    points = np.asarray(getattr(cloud, "points", cloud), dtype=float)
    if points.size == 0:
        raise ValueError("oracle needs a non-empty cloud")
    return points.reshape(len(points), -1)


def brute_force_edf(cloud, q: Sequence[float]) -> float:
    """Exact distance from q to the nearest cloud point by linear scan."""
    points = _cloud_points(cloud)
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape[0] != points.shape[1]:
        raise ValueError(f"query is {q.shape[0]}D but the cloud is {points.shape[1]}D")
    return float(np.sqrt(np.min(np.sum((points - q) ** 2, axis=1))))


def oracle_distances(cloud, Q: np.ndarray) -> np.ndarray:
    """Exact nearest-sample distances for many queries using a KD-tree."""
    points = _cloud_points(cloud)
    dist, _ = KDTree(points).query(np.asarray(Q, dtype=float), k=1)
    return np.asarray(dist, dtype=float)


@dataclass
class BenchReport:
    """
    Field accuracy against the oracle.

    Attributes:
        queries: Query points in raster order (K x D)
        d_field: Field distances
        d_oracle: Oracle distances
        abs_err: |d_field - d_oracle|
        wall_time: Seconds spent evaluating the field
        summary: rmse, mae, max, count
    """

    queries: np.ndarray
    d_field: np.ndarray
    d_oracle: np.ndarray
    abs_err: np.ndarray
    wall_time: float
    summary: Dict[str, float] = field(default_factory=dict)

    @property
    def rmse(self) -> float:
        return self.summary["rmse"]

    @property
    def mae(self) -> float:
        return self.summary["mae"]

    @property
    def max_error(self) -> float:
        return self.summary["max"]

    @property
    def count(self) -> int:
        return int(self.summary["count"])


def summarize(abs_err: np.ndarray) -> Dict[str, float]:
    err = np.asarray(abs_err, dtype=float)
    return {
        "rmse": float(np.sqrt(np.mean(err**2))),
        "mae": float(np.mean(err)),
        "max": float(np.max(err)),
        "count": float(len(err)),
    }


def run_benchmark(model, cloud, grid: GridSpec, band: Sequence[float]) -> BenchReport:
    """
    Compare a field with the oracle on in-band grid nodes.

    Args:
        model: Field or SubmapGrid under test
        cloud: Surface samples defining the oracle
        grid: Sampling grid; rows follow its raster order
        band: (d_min, d_max) oracle distance band, inclusive

    Returns:
        BenchReport: Per-query rows and summary statistics

    Raises:
        ValueError: If no grid node falls inside the band
    """
    d_min, d_max = float(band[0]), float(band[1])
    if d_min > d_max:
        raise ValueError(f"band lower bound {d_min} exceeds upper bound {d_max}")
    nodes = grid.nodes()
    oracle = oracle_distances(cloud, nodes)
    mask = (oracle >= d_min) & (oracle <= d_max)
    if not mask.any():
        raise ValueError(f"no grid points with oracle distance in [{d_min}, {d_max}]")

    Q = nodes[mask]
    start = time.perf_counter()
    d_field = np.asarray(model.distances(Q), dtype=float)
    wall_time = time.perf_counter() - start
    abs_err = np.abs(d_field - oracle[mask])

    report = BenchReport(
        queries=Q,
        d_field=d_field,
        d_oracle=oracle[mask],
        abs_err=abs_err,
        wall_time=wall_time,
        summary=summarize(abs_err),
    )
    report.summary["wall_time"] = wall_time
    logger.info(
        f"Benchmark: {report.count} queries, rmse={report.rmse:.5f} "
        f"mae={report.mae:.5f} max={report.max_error:.5f} ({wall_time:.3f}s)"
    )
    return report


def write_report_csv(path: Union[str, Path], report: BenchReport) -> None:
    """Write rows as CSV; 2D queries get qz = 0."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for q, df, do, err in zip(report.queries, report.d_field, report.d_oracle, report.abs_err):
            coords = list(q) + [0.0] * (3 - len(q))
            writer.writerow([format_float(v) for v in (*coords, df, do, err)])


def read_report_errors(path: Union[str, Path]) -> List[float]:
    """abs_err column of a report CSV."""
    with open(path, encoding="utf-8", newline="") as fh:
        return [float(row["abs_err"]) for row in csv.DictReader(fh)]
