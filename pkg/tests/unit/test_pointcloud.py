"""
Unit tests for point cloud I/O.
"""

import numpy as np
import pytest

from gpfield.utils.pointcloud import (
    CloudFormat,
    PointCloud,
    format_float,
    load_point_cloud,
    write_ply,
    write_xyz,
)


class TestPointCloud:
    """Test the container."""

    def test_dimensions(self):
        assert PointCloud(np.zeros((4, 2))).dim == 2
        assert len(PointCloud(np.zeros((4, 3)))) == 4

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError, match="N x 2 or N x 3"):
            PointCloud(np.zeros((4, 4)))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="point 1"):
            PointCloud(np.array([[0.0, 0.0], [np.inf, 1.0]]))


class TestXyz:
    """Test the XYZ reader and writer."""

    def test_parse_with_comments(self, tmp_path):
        path = tmp_path / "cloud.xyz"
        path.write_text("# scan 1\n0 0 0\n\n1.5 -2 3e-1\n")
        cloud = load_point_cloud(path)
        assert cloud.dim == 3
        assert cloud.points.tolist() == [[0.0, 0.0, 0.0], [1.5, -2.0, 0.3]]
        assert cloud.source == str(path)

    def test_parse_2d(self, tmp_path):
        path = tmp_path / "cloud.xyz"
        path.write_text("1 2\n3 4\n")
        assert load_point_cloud(path).dim == 2

    def test_mixed_dimensions(self, tmp_path):
        path = tmp_path / "cloud.xyz"
        path.write_text("1 2\n3 4 5\n")
        with pytest.raises(ValueError, match=r":2: expected 2 coordinates"):
            load_point_cloud(path)

    def test_malformed_coordinate(self, tmp_path):
        path = tmp_path / "cloud.xyz"
        path.write_text("1 2 3\n4 five 6\n")
        with pytest.raises(ValueError, match=r":2: malformed"):
            load_point_cloud(path)

    def test_non_finite_coordinate(self, tmp_path):
        path = tmp_path / "cloud.xyz"
        path.write_text("1 nan 3\n")
        with pytest.raises(ValueError, match=r":1: non-finite"):
            load_point_cloud(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_point_cloud(tmp_path / "absent.xyz")

    def test_round_trip_is_exact(self, tmp_path, rng):
        points = rng.normal(size=(25, 3)) * np.array([1e-7, 1.0, 1e5])
        path = tmp_path / "cloud.xyz"
        write_xyz(path, points)
        assert np.array_equal(load_point_cloud(path).points, points)


class TestPly:
    """Test the text PLY reader and writer."""

    def test_parse_with_extra_elements(self, tmp_path):
        path = tmp_path / "mesh.ply"
        path.write_text(
            "ply\nformat ascii 1.0\ncomment test\n"
            "element vertex 2\nproperty float x\nproperty float y\nproperty float z\n"
            "property uchar red\n"
            "element face 0\nproperty list uchar int vertex_indices\n"
            "end_header\n0 1 2 255\n3 4 5 0\n"
        )
        cloud = load_point_cloud(path)
        assert cloud.points.tolist() == [[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]]

    def test_binary_rejected(self, tmp_path):
        path = tmp_path / "cloud.ply"
        path.write_bytes(b"ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n")
        with pytest.raises(ValueError, match="unsupported encoding"):
            load_point_cloud(path)

    def test_missing_magic(self, tmp_path):
        path = tmp_path / "cloud.ply"
        path.write_text("format ascii 1.0\n")
        with pytest.raises(ValueError, match="magic"):
            load_point_cloud(path)

    def test_truncated_body(self, tmp_path):
        path = tmp_path / "cloud.ply"
        path.write_text(
            "ply\nformat ascii 1.0\nelement vertex 3\nproperty double x\nproperty double y\n"
            "end_header\n0 0\n1 1\n"
        )
        with pytest.raises(ValueError, match="unexpected end of file"):
            load_point_cloud(path)

    def test_round_trip(self, tmp_path, rng):
        points = rng.normal(size=(10, 2))
        path = tmp_path / "cloud.ply"
        write_ply(path, points)
        assert np.array_equal(load_point_cloud(path).points, points)

    def test_format_override(self, tmp_path):
        path = tmp_path / "cloud.txt"
        write_ply(path, np.zeros((2, 3)))
        assert len(load_point_cloud(path, CloudFormat.PLY)) == 2


def test_format_float_round_trips():
    for value in (0.1, 1e-300, -2.5e17, 1.0 / 3.0):
        assert float(format_float(value)) == value
