"""
Scan-to-field registration.

Registers a point scan against a distance field by minimising the robust sum
of squared field distances with damped Gauss-Newton over rigid motions.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.transform import Rotation

from gpfield.core.distance_field import FieldSamples
from gpfield.utils.pointcloud import format_float

logger = logging.getLogger(__name__)


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


@dataclass(frozen=True, eq=False)
class Pose:
    """
    Rigid transform p -> R p + t in 2D or 3D.

    Attributes:
        rotation: D x D rotation matrix
        translation: D translation vector
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        R = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float).reshape(-1)
        if R.shape != (len(t), len(t)) or len(t) not in (2, 3):
            raise ValueError(f"inconsistent pose shapes {R.shape} and {t.shape}")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls, dim: int) -> "Pose":
        return cls(np.eye(dim), np.zeros(dim))

    @classmethod
    def from_xytheta(cls, x: float, y: float, theta: float) -> "Pose":
        c, s = math.cos(theta), math.sin(theta)
        return cls(np.array([[c, -s], [s, c]]), np.array([x, y]))

    @classmethod
    def exp(cls, xi: np.ndarray) -> "Pose":
        """
        Exponential map of a twist.

        A 2D twist is (vx, vy, omega); a 3D twist is (v, omega) with six entries.
        """
        xi = np.asarray(xi, dtype=float).reshape(-1)
        if xi.size == 3:
            v, theta = xi[:2], xi[2]
            c, s = math.cos(theta), math.sin(theta)
            if abs(theta) < 1e-9:
                V = np.array([[1.0, -0.5 * theta], [0.5 * theta, 1.0]])
            else:
                V = np.array([[s, -(1.0 - c)], [1.0 - c, s]]) / theta
            return cls(np.array([[c, -s], [s, c]]), V @ v)
        if xi.size == 6:
            v, w = xi[:3], xi[3:]
            theta = float(np.linalg.norm(w))
            W = _skew(w)
            if theta < 1e-9:
                V = np.eye(3) + 0.5 * W
            else:
                V = (
                    np.eye(3)
                    + (1.0 - math.cos(theta)) / theta**2 * W
                    + (theta - math.sin(theta)) / theta**3 * (W @ W)
                )
            return cls(Rotation.from_rotvec(w).as_matrix(), V @ v)
        raise ValueError(f"twist must have 3 or 6 entries, got {xi.size}")

    @property
    def dim(self) -> int:
        return int(len(self.translation))

    @property
    def angle(self) -> float:
        """Rotation angle of a 2D pose."""
        if self.dim != 2:
            raise ValueError("angle is only defined for 2D poses")
        return math.atan2(self.rotation[1, 0], self.rotation[0, 0])

    def compose(self, other: "Pose") -> "Pose":
        """self * other (apply other first)."""
        return Pose(
            self.rotation @ other.rotation, self.rotation @ other.translation + self.translation
        )

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one point (D,) or many (N x D)."""
        P = np.asarray(points, dtype=float)
        if P.ndim == 1:
            return self.rotation @ P + self.translation
        return P @ self.rotation.T + self.translation

    def as_matrix(self) -> np.ndarray:
        T = np.eye(self.dim + 1)
        T[: self.dim, : self.dim] = self.rotation
        T[: self.dim, self.dim] = self.translation
        return T


def pose_apply(pose: Pose, p: np.ndarray) -> np.ndarray:
    """R p + t."""
    return pose.apply(p)


class RegistrationOptions(BaseModel):
    """
    Solver settings for scan registration.

    Attributes:
        huber_delta: Huber loss threshold in meters
        max_iterations: Iteration cap
        step_tolerance: Convergence threshold on the update norm
        initial_damping: Initial Levenberg damping
        min_residuals: Minimum number of points with a usable gradient
    """

    model_config = ConfigDict(frozen=True)

    huber_delta: float = Field(default=0.1, gt=0)
    max_iterations: int = Field(default=50, ge=1)
    step_tolerance: float = Field(default=1e-8, gt=0)
    initial_damping: float = Field(default=1e-4, gt=0)
    min_residuals: int = Field(default=10, ge=1)


@dataclass
class RegistrationReport:
    """
    Outcome of a scan registration.

    Attributes:
        pose: Estimated scan-to-map transform
        iterations: Gauss-Newton iterations performed
        initial_rmse: Root mean square residual over usable points at the initial pose
        final_rmse: Root mean square residual over usable points at the returned pose
        converged: Whether the update norm fell below tolerance
        inlier_fraction: Fraction of points with a usable gradient and |r| <= delta
        final_cost: Robust cost at the returned pose
        cost_history: Robust cost at the initial pose and after every accepted step
    """

    pose: Pose
    iterations: int
    initial_rmse: float
    final_rmse: float
    converged: bool
    inlier_fraction: float
    final_cost: float
    cost_history: List[float]



def _huber(residuals: np.ndarray, delta: float) -> Tuple[np.ndarray, np.ndarray]:
    """Per-residual Huber loss and IRLS weight."""
    a = np.abs(residuals)
    loss = np.where(a <= delta, 0.5 * residuals**2, delta * (a - 0.5 * delta))
    with np.errstate(divide="ignore"):
        weight = np.where(a <= delta, 1.0, delta / a)
    return loss, weight


def _jacobian(world: np.ndarray, gradient: np.ndarray) -> np.ndarray:
    """Rows d r_i / d xi for the left perturbation exp(xi) * T."""
    if world.shape[1] == 2:
        perp = np.stack([-world[:, 1], world[:, 0]], axis=1)
        return np.column_stack([gradient, np.sum(gradient * perp, axis=1)])
    return np.column_stack([gradient, np.cross(world, gradient)])


def _evaluate(field, scan: np.ndarray, pose: Pose) -> Tuple[np.ndarray, FieldSamples]:
    world = pose.apply(scan)
    return world, field.evaluate(world)


def _rmse(samples: FieldSamples) -> float:
    residuals = samples.distance[samples.valid_gradient]
    if residuals.size == 0:
        return float("inf")
    return float(np.sqrt(np.mean(residuals**2)))


def registration_cost(
    field, scan: np.ndarray, pose: Pose, delta: float = 0.1
) -> Tuple[float, np.ndarray]:
    """
    Robust registration cost and its gradient over a left perturbation.

    Points whose field gradient is invalid contribute to the cost but not to
    the gradient.
    """
    world, samples = _evaluate(field, np.asarray(scan, dtype=float), pose)
    r = samples.distance
    loss, weight = _huber(r, delta)
    valid = samples.valid_gradient
    J = _jacobian(world[valid], samples.gradient[valid])
    return float(loss.sum()), J.T @ (weight[valid] * r[valid])


def register_scan(
    field,
    scan: np.ndarray,
    init: Optional[Pose] = None,
    options: Optional[RegistrationOptions] = None,
) -> RegistrationReport:
    """
    Align a scan to a distance field.

    Args:
        field: Field or SubmapGrid to register against
        scan: Scan points in the sensor frame (N x D)
        init: Initial scan-to-map pose; identity when omitted
        options: Solver settings

    Returns:
        RegistrationReport: The estimated pose and solver statistics

    Raises:
        ValueError: If the scan dimension does not match the field
        RuntimeError: If fewer than min_residuals points have a usable gradient
    """
    opts = options or RegistrationOptions()
    scan = np.asarray(getattr(scan, "points", scan), dtype=float)
    if scan.ndim != 2 or scan.shape[1] != field.dim:
        raise ValueError(f"scan must be N x {field.dim}, got shape {scan.shape}")
    pose = init or Pose.identity(field.dim)
    if pose.dim != field.dim:
        raise ValueError(f"initial pose is {pose.dim}D but the field is {field.dim}D")

    delta = opts.huber_delta
    damping = opts.initial_damping
    world, samples = _evaluate(field, scan, pose)
    loss, weight = _huber(samples.distance, delta)
    cost = float(loss.sum())
    initial_rmse = _rmse(samples)
    history = [cost]
    converged = False
    iterations = 0

    for iterations in range(1, opts.max_iterations + 1):
        valid = samples.valid_gradient
        if int(valid.sum()) < opts.min_residuals:
            raise RuntimeError("insufficient overlap")
        r = samples.distance[valid]
        w = weight[valid]
        J = _jacobian(world[valid], samples.gradient[valid])
        H = J.T @ (w[:, None] * J)
        g = J.T @ (w * r)
        step = np.linalg.solve(H + damping * np.eye(len(g)), -g)

        candidate = Pose.exp(step).compose(pose)
        cand_world, cand_samples = _evaluate(field, scan, candidate)
        cand_loss, cand_weight = _huber(cand_samples.distance, delta)
        cand_cost = float(cand_loss.sum())

        if cand_cost < cost:
            pose, world, samples, weight, cost = (
                candidate,
                cand_world,
                cand_samples,
                cand_weight,
                cand_cost,
            )
            history.append(cost)
            damping = max(damping / 10.0, 1e-12)
        else:
            damping *= 10.0
        logger.debug(f"iter {iterations}: cost={cost:.6g} |step|={np.linalg.norm(step):.3g}")

        if np.linalg.norm(step) < opts.step_tolerance:
            converged = True
            break

    inliers = samples.valid_gradient & (np.abs(samples.distance) <= delta)
    report = RegistrationReport(
        pose=pose,
        iterations=iterations,
        initial_rmse=initial_rmse,
        final_rmse=_rmse(samples),
        converged=converged,
        inlier_fraction=float(inliers.mean()) if len(inliers) else 0.0,
        final_cost=cost,
        cost_history=history,
    )
    logger.info(
        f"Registration finished: {iterations} iterations, "
        f"rmse={initial_rmse:.4g}->{report.final_rmse:.4g}, "
        f"converged={converged}, inliers={report.inlier_fraction:.2f}"
    )
    return report


def _as_3d(pose: Pose) -> Tuple[np.ndarray, np.ndarray]:
    if pose.dim == 3:
        return pose.rotation, pose.translation
    R = np.eye(3)
    R[:2, :2] = pose.rotation
    return R, np.append(pose.translation, 0.0)


def write_trajectory(
    path: Union[str, Path], poses: Iterable[Tuple[float, Pose]]
) -> None:
    """
    Write stamped poses as "timestamp tx ty tz qx qy qz qw" lines.

    2D poses are written as rotations about z with tz = 0.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for stamp, pose in poses:
            R, t = _as_3d(pose)
            quat = Rotation.from_matrix(R).as_quat()
            values = [stamp, *t, *quat]
            fh.write(" ".join(format_float(v) for v in values) + "\n")


def read_trajectory(path: Union[str, Path], dim: int) -> List[Tuple[float, Pose]]:
    """
    Read "timestamp tx ty tz qx qy qz qw" lines back into stamped poses.

    For dim == 2 the rotation about z and the x/y translation are kept.
    """
    poses: List[Tuple[float, Pose]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                values = [float(t) for t in line.split()]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed trajectory line")
            if len(values) != 8:
                raise ValueError(f"{path}:{lineno}: expected 8 values, got {len(values)}")
            R = Rotation.from_quat(values[4:]).as_matrix()
            t = np.asarray(values[1:4])
            pose = Pose(R, t) if dim == 3 else Pose(R[:2, :2], t[:2])
            poses.append((values[0], pose))
    return poses
