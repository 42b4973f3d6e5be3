"""
Unit tests for poses and scan registration.
"""

import math

import numpy as np
import pytest

from gpfield.core.odometry import (
    Pose,
    RegistrationOptions,
    pose_apply,
    read_trajectory,
    register_scan,
    registration_cost,
    write_trajectory,
)


class TestPose:
    """Test rigid transforms."""

    def test_apply(self):
        pose = Pose.from_xytheta(1.0, 2.0, math.pi / 2)
        assert pose_apply(pose, [1.0, 0.0]) == pytest.approx([1.0, 3.0])
        batch = pose.apply(np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert batch == pytest.approx(np.array([[1.0, 3.0], [0.0, 2.0]]))

    def test_exp_2d(self):
        assert Pose.exp([1.0, 0.0, 0.0]).translation == pytest.approx([1.0, 0.0])
        assert Pose.exp([0.0, 0.0, math.pi / 2]).angle == pytest.approx(math.pi / 2)

    def test_exp_3d_rotation(self):
        pose = Pose.exp([0.0, 0.0, 0.0, 0.0, 0.0, math.pi / 2])
        assert pose.apply(np.array([1.0, 0.0, 0.0])) == pytest.approx([0.0, 1.0, 0.0])
        assert np.linalg.det(pose.rotation) == pytest.approx(1.0)

    def test_exp_small_angle_matches_first_order(self):
        xi = np.array([0.3, -0.2, 1e-12])
        assert Pose.exp(xi).translation == pytest.approx(xi[:2])

    def test_exp_rejects_bad_length(self):
        with pytest.raises(ValueError, match="3 or 6"):
            Pose.exp([0.0, 0.0])

    def test_inverse_and_compose(self, rng):
        for _ in range(5):
            pose = Pose.exp(rng.normal(size=6))
            ident = pose.compose(pose.inverse())
            assert ident.rotation == pytest.approx(np.eye(3), abs=1e-12)
            assert ident.translation == pytest.approx(np.zeros(3), abs=1e-12)

    def test_compose_order(self):
        a = Pose.from_xytheta(1.0, 0.0, 0.0)
        b = Pose.from_xytheta(0.0, 0.0, math.pi / 2)
        p = np.array([1.0, 0.0])
        assert a.compose(b).apply(p) == pytest.approx(a.apply(b.apply(p)))

    def test_as_matrix(self):
        T = Pose.from_xytheta(0.5, -1.0, 0.0).as_matrix()
        assert T.shape == (3, 3)
        assert T[:2, 2] == pytest.approx([0.5, -1.0])

    def test_inconsistent_shapes(self):
        with pytest.raises(ValueError, match="inconsistent"):
            Pose(np.eye(3), np.zeros(2))


class TestRegistrationCost:
    """Test the robust cost gradient."""

    def test_gradient_matches_finite_differences(self, lshape_field, lshape_points):
        pose = Pose.from_xytheta(0.05, 0.04, 0.02)
        _, grad = registration_cost(lshape_field, lshape_points, pose)
        h = 1e-6
        numeric = []
        for e in np.eye(3):
            up, _ = registration_cost(lshape_field, lshape_points, Pose.exp(h * e).compose(pose))
            down, _ = registration_cost(
                lshape_field, lshape_points, Pose.exp(-h * e).compose(pose)
            )
            numeric.append((up - down) / (2 * h))
        assert np.allclose(grad, numeric, rtol=1e-4, atol=1e-7)

    def test_zero_at_truth(self, lshape_field, lshape_points):
        cost, _ = registration_cost(lshape_field, lshape_points, Pose.identity(2))
        assert cost < 1e-3


class TestRegisterScan:
    """Test Gauss-Newton scan registration."""

    def test_recovers_perturbed_poses(self, lshape_field, lshape_points):
        rng = np.random.default_rng(42)
        for _ in range(20):
            direction = rng.normal(size=2)
            t0 = rng.uniform(0.0, 0.2) * direction / np.linalg.norm(direction)
            theta0 = math.radians(rng.uniform(-10.0, 10.0))
            init = Pose.from_xytheta(t0[0], t0[1], theta0)

            report = register_scan(lshape_field, lshape_points, init)
            assert report.iterations <= 50
            assert np.linalg.norm(report.pose.translation) < 5e-3
            assert abs(math.degrees(report.pose.angle)) < 0.5

    def test_recovers_known_offset(self, lshape_field, lshape_points):
        truth = Pose.from_xytheta(0.1, -0.05, math.radians(4.0))
        scan = truth.inverse().apply(lshape_points)
        report = register_scan(lshape_field, scan)
        assert report.pose.translation == pytest.approx(truth.translation, abs=5e-3)
        assert report.pose.angle == pytest.approx(truth.angle, abs=math.radians(0.5))
        assert report.inlier_fraction > 0.9

    def test_surface_scan_at_identity(self, circle_field, circle_points):
        report = register_scan(circle_field, circle_points)
        assert report.converged
        assert np.linalg.norm(report.pose.translation) < 1e-4
        assert math.degrees(abs(report.pose.angle)) < 0.01
        assert report.inlier_fraction > 0.9

    def test_quarter_turn_on_circle(self, circle_field, circle_points):
        init = Pose.from_xytheta(0.0, 0.0, math.pi / 2)
        report = register_scan(circle_field, circle_points, init)
        assert report.converged
        assert report.final_rmse < 5e-3
        assert np.linalg.norm(report.pose.translation) < 1e-4

    def test_recovers_circle_offset(self, circle_field, circle_points):
        truth = Pose.from_xytheta(0.1, -0.05, math.radians(5.0))
        scan = truth.apply(circle_points)
        report = register_scan(circle_field, scan)
        assert report.converged
        # Rotation about the centre is free, so only check the centre lands on the origin
        assert np.linalg.norm(report.pose.apply(truth.translation)) < 5e-3
        assert report.final_rmse <= report.initial_rmse
        assert report.final_rmse < 5e-3

    def test_accepted_steps_never_increase_cost(self, lshape_field, lshape_points):
        init = Pose.from_xytheta(0.1, -0.08, math.radians(6.0))
        report = register_scan(lshape_field, lshape_points, init)
        history = np.array(report.cost_history)
        assert len(history) >= 2
        assert np.all(np.diff(history) <= 0.0)
        assert history[-1] == report.final_cost

    def test_report_rmse(self, lshape_field, lshape_points):
        init = Pose.from_xytheta(0.05, 0.02, 0.05)
        report = register_scan(lshape_field, lshape_points, init)
        assert report.initial_rmse > 0.01
        assert report.final_rmse < report.initial_rmse

    def test_insufficient_overlap(self, lshape_field, lshape_points):
        far = lshape_points + 100.0
        with pytest.raises(RuntimeError, match="insufficient overlap"):
            register_scan(lshape_field, far)

    def test_too_few_points(self, lshape_field, lshape_points):
        with pytest.raises(RuntimeError, match="insufficient overlap"):
            register_scan(lshape_field, lshape_points[:5])

    def test_dimension_mismatch(self, lshape_field):
        with pytest.raises(ValueError, match="scan must be"):
            register_scan(lshape_field, np.zeros((20, 3)))

    def test_options_validation(self):
        with pytest.raises(ValueError):
            RegistrationOptions(huber_delta=0.0)
        assert RegistrationOptions().max_iterations == 50


class TestTrajectoryIO:
    """Test trajectory files."""

    def test_round_trip_2d(self, tmp_path):
        poses = [(0.0, Pose.identity(2)), (1.5, Pose.from_xytheta(0.3, -0.2, 0.7))]
        path = tmp_path / "traj.txt"
        write_trajectory(path, poses)

        lines = path.read_text().splitlines()
        assert len(lines) == 2
        assert all(len(line.split()) == 8 for line in lines)
        assert lines[1].split()[3] == "0.0"

        loaded = read_trajectory(path, dim=2)
        assert [stamp for stamp, _ in loaded] == [0.0, 1.5]
        assert loaded[1][1].translation == pytest.approx([0.3, -0.2], abs=1e-12)
        assert loaded[1][1].angle == pytest.approx(0.7, abs=1e-12)

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0 1 2 3\n")
        with pytest.raises(ValueError, match=":1: expected 8 values"):
            read_trajectory(path, dim=2)
