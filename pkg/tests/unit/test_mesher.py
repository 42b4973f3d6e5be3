"""
Unit tests for iso-surface and contour extraction.
"""

import numpy as np
import pytest

from gpfield.core.distance_field import FieldConfig, build_field, default_field_config
from gpfield.core.kernels import KernelSpec
from gpfield.core.mesher import (
    GridSpec,
    TriangleMesh,
    extract_contour_2d,
    extract_isosurface_3d,
    polyline_length,
    write_mesh_ply,
    write_polylines,
)
from gpfield.utils.scenes import fibonacci_sphere


class SaddleField:
    """Bilinear field whose single cell has diagonal corners on opposite sides."""

    dim = 2

    def __init__(self, centre: float):
        self.centre = centre

    def distances(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return 0.5 + self.centre + (points[:, 0] - 0.5) * (points[:, 1] - 0.5)


@pytest.fixture(scope="module")
def sphere_mesh():
    points = fibonacci_sphere(1000)
    field = build_field(points, default_field_config(points, length_scale=0.12))
    grid = GridSpec(bbox_min=(-1.3,) * 3, bbox_max=(1.3,) * 3, cell=0.05, iso=0.05)
    return extract_isosurface_3d(field, grid)


@pytest.fixture(scope="module")
def circle_contours(circle_field):
    grid = GridSpec(bbox_min=(-1.3, -1.3), bbox_max=(1.3, 1.3), cell=0.02, iso=0.02)
    return extract_contour_2d(circle_field, grid)


class TestGridSpec:
    """Test sampling grids."""

    def test_shape_and_nodes(self):
        grid = GridSpec(bbox_min=(0.0, 0.0), bbox_max=(1.0, 0.5), cell=0.25)
        assert grid.shape == (5, 3)
        assert grid.cell_count == 8
        nodes = grid.nodes()
        assert nodes.shape == (15, 2)
        assert nodes[1] == pytest.approx([0.0, 0.25])
        assert nodes[3] == pytest.approx([0.25, 0.0])

    def test_iso_defaults_to_cell(self):
        assert GridSpec(bbox_min=(0, 0), bbox_max=(1, 1), cell=0.1).level == 0.1
        assert GridSpec(bbox_min=(0, 0), bbox_max=(1, 1), cell=0.1, iso=0.3).level == 0.3

    def test_rejects_bad_box(self):
        with pytest.raises(ValueError):
            GridSpec(bbox_min=(0.0, 0.0), bbox_max=(1.0, 1.0, 1.0), cell=0.1)
        with pytest.raises(ValueError):
            GridSpec(bbox_min=(1.0, 0.0), bbox_max=(0.0, 1.0), cell=0.1)
        with pytest.raises(ValueError):
            GridSpec(bbox_min=(0.0, 0.0), bbox_max=(1.0, 1.0), cell=0.0)


class TestIsosurface:
    """Test marching cubes extraction."""

    def test_sphere_vertices_near_surface(self, sphere_mesh):
        assert len(sphere_mesh) > 0
        radii = np.linalg.norm(sphere_mesh.vertices, axis=1)
        assert np.all(np.abs(radii - 1.0) <= 0.1)

    def test_triangles_valid(self, sphere_mesh):
        tris = sphere_mesh.triangles
        assert tris.min() >= 0
        assert tris.max() < len(sphere_mesh.vertices)
        assert np.all(tris[:, 0] != tris[:, 1])
        assert np.all(tris[:, 1] != tris[:, 2])
        assert np.all(tris[:, 0] != tris[:, 2])

    def test_independent_of_cloud_order(self, rng):
        points = fibonacci_sphere(300)
        config = default_field_config(points, length_scale=0.25)
        grid = GridSpec(bbox_min=(-1.3,) * 3, bbox_max=(1.3,) * 3, cell=0.1, iso=0.1)
        ordered = extract_isosurface_3d(build_field(points, config), grid)
        shuffled_points = points[rng.permutation(len(points))]
        shuffled = extract_isosurface_3d(build_field(shuffled_points, config), grid)

        assert len(ordered) > 0
        assert np.array_equal(ordered.triangles, shuffled.triangles)
        assert np.allclose(ordered.vertices, shuffled.vertices, atol=1e-8)

    def test_empty_without_crossing(self):
        config = FieldConfig(kernel=KernelSpec(length_scale=0.1), noise_variance=0.0)
        field = build_field(np.zeros((1, 3)), config)
        grid = GridSpec(bbox_min=(3.0, 3.0, 3.0), bbox_max=(3.5, 3.5, 3.5), cell=0.1)
        mesh = extract_isosurface_3d(field, grid)
        assert len(mesh) == 0
        assert mesh.vertices.shape == (0, 3)

    def test_grid_too_large(self):
        config = FieldConfig(kernel=KernelSpec(length_scale=0.1), noise_variance=0.0)
        field = build_field(np.zeros((1, 3)), config)
        grid = GridSpec(bbox_min=(0.0, 0.0, 0.0), bbox_max=(1000.0, 1000.0, 1000.0), cell=0.01)
        with pytest.raises(ValueError, match="grid too large"):
            extract_isosurface_3d(field, grid)

    def test_rejects_2d_grid(self, circle_field):
        grid = GridSpec(bbox_min=(0.0, 0.0), bbox_max=(1.0, 1.0), cell=0.1)
        with pytest.raises(ValueError, match="3D"):
            extract_isosurface_3d(circle_field, grid)


class TestContour:
    """Test marching squares extraction."""

    def test_two_closed_loops(self, circle_contours):
        assert len(circle_contours) == 2
        for loop in circle_contours:
            assert np.array_equal(loop[0], loop[-1])

    def test_loops_hug_the_circle(self, circle_contours):
        for loop in circle_contours:
            radii = np.linalg.norm(loop, axis=1)
            assert np.all((radii >= 0.94) & (radii <= 1.06))

    def test_loop_lengths(self, circle_contours):
        for loop in circle_contours:
            radius = float(np.mean(np.linalg.norm(loop, axis=1)))
            assert polyline_length(loop) == pytest.approx(2 * np.pi * radius, rel=0.02)

    def test_offsets_on_both_sides(self, circle_contours):
        means = sorted(float(np.mean(np.linalg.norm(loop, axis=1))) for loop in circle_contours)
        assert means[0] < 1.0 < means[1]

    def test_no_contour_far_away(self, circle_field):
        grid = GridSpec(bbox_min=(3.0, 3.0), bbox_max=(4.0, 4.0), cell=0.1)
        assert extract_contour_2d(circle_field, grid) == []

    @pytest.mark.parametrize(
        "centre, cut_corners",
        [(-0.1, {(0.0, 0.0), (1.0, 1.0)}), (0.1, {(1.0, 0.0), (0.0, 1.0)})],
    )
    def test_saddle_resolved_by_centre_sample(self, centre, cut_corners):
        grid = GridSpec(bbox_min=(0.0, 0.0), bbox_max=(1.0, 1.0), cell=1.0, iso=0.5)
        polylines = extract_contour_2d(SaddleField(centre), grid)
        assert len(polylines) == 2
        corners = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        nearest = set()
        for line in polylines:
            assert line.shape == (2, 2)
            mid = line.mean(axis=0)
            nearest.add(tuple(corners[np.argmin(np.linalg.norm(corners - mid, axis=1))]))
        assert nearest == cut_corners


class TestWriters:
    """Test mesh and polyline files."""

    def test_write_mesh_ply(self, tmp_path):
        mesh = TriangleMesh(
            vertices=np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
            triangles=np.array([[0, 1, 2]]),
        )
        out = tmp_path / "mesh.ply"
        write_mesh_ply(out, mesh)
        lines = out.read_text().splitlines()
        assert lines[0] == "ply"
        assert "element vertex 3" in lines
        assert "element face 1" in lines
        assert lines[lines.index("end_header") + 1] == "0.0 0.0 0.0"
        assert lines[-1] == "3 0 1 2"

    def test_write_polylines(self, tmp_path):
        out = tmp_path / "contours.txt"
        write_polylines(out, [np.array([[0.0, 0.0], [1.0, 0.5]]), np.array([[2.0, 2.0]])])
        assert out.read_text() == "0.0 0.0\n1.0 0.5\n\n2.0 2.0\n"
