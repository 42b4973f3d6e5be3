"""
Unit tests for the oracle and benchmark report.
"""

import numpy as np
import pytest

from gpfield.core.benchmark import (
    CSV_HEADER,
    brute_force_edf,
    oracle_distances,
    read_report_errors,
    run_benchmark,
    summarize,
    write_report_csv,
)
from gpfield.core.distance_field import FieldConfig, build_field
from gpfield.core.kernels import KernelSpec
from gpfield.core.mesher import GridSpec


class TestOracle:
    """Test exact nearest-sample distances."""

    def test_brute_force_examples(self):
        cloud = np.array([[0.0, 0.0], [3.0, 0.0]])
        assert brute_force_edf(cloud, [1.0, 0.0]) == 1.0
        assert brute_force_edf(cloud, [3.0, 4.0]) == 4.0
        assert brute_force_edf(cloud, [0.0, 0.0]) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="3D"):
            brute_force_edf(np.zeros((2, 2)), [0.0, 0.0, 0.0])

    def test_empty_cloud(self):
        with pytest.raises(ValueError, match="non-empty"):
            brute_force_edf(np.empty((0, 2)), [0.0, 0.0])

    def test_kd_tree_matches_linear_scan(self, circle_points, rng):
        Q = rng.uniform(-2, 2, size=(50, 2))
        expected = [brute_force_edf(circle_points, q) for q in Q]
        assert oracle_distances(circle_points, Q) == pytest.approx(expected, rel=1e-12)


class TestRunBenchmark:
    """Test benchmark runs and reports."""

    def test_single_point_field(self):
        config = FieldConfig(kernel=KernelSpec(length_scale=0.5), noise_variance=0.0)
        cloud = np.zeros((1, 2))
        field = build_field(cloud, config)
        grid = GridSpec(bbox_min=(-1.0, -1.0), bbox_max=(1.0, 1.0), cell=0.1)
        report = run_benchmark(field, cloud, grid, (0.1, 1.0))
        assert report.count > 0
        assert report.rmse < 1e-6
        assert np.all((report.d_oracle >= 0.1) & (report.d_oracle <= 1.0))

    def test_empty_band(self, circle_field, circle_points):
        grid = GridSpec(bbox_min=(-0.1, -0.1), bbox_max=(0.1, 0.1), cell=0.05)
        with pytest.raises(ValueError, match="no grid points"):
            run_benchmark(circle_field, circle_points, grid, (0.0, 0.5))

    def test_inverted_band(self, circle_field, circle_points):
        grid = GridSpec(bbox_min=(-1.0, -1.0), bbox_max=(1.0, 1.0), cell=0.1)
        with pytest.raises(ValueError, match="exceeds"):
            run_benchmark(circle_field, circle_points, grid, (0.5, 0.1))

    def test_circle_scene_accuracy(self, circle_field, circle_points):
        grid = GridSpec(bbox_min=(-1.6, -1.6), bbox_max=(1.6, 1.6), cell=0.02)
        report = run_benchmark(circle_field, circle_points, grid, (0.05, 0.5))
        assert report.rmse <= 0.02
        assert report.max_error >= report.rmse >= 0.0
        assert report.wall_time >= 0.0

    def test_csv_summary_recomputes(self, circle_field, circle_points, tmp_path):
        grid = GridSpec(bbox_min=(-1.5, -1.5), bbox_max=(1.5, 1.5), cell=0.1)
        report = run_benchmark(circle_field, circle_points, grid, (0.05, 0.5))
        out = tmp_path / "report.csv"
        write_report_csv(out, report)

        lines = out.read_text().splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        assert len(lines) == report.count + 1
        assert all(line.split(",")[2] == "0.0" for line in lines[1:])

        recomputed = summarize(np.array(read_report_errors(out)))
        for key in ("rmse", "mae", "max", "count"):
            assert recomputed[key] == pytest.approx(report.summary[key], abs=1e-12)


def test_summarize():
    summary = summarize(np.array([3.0, 4.0]))
    assert summary["rmse"] == pytest.approx(np.sqrt(12.5))
    assert summary["mae"] == 3.5
    assert summary["max"] == 4.0
    assert summary["count"] == 2.0
