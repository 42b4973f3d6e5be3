"""
Gradient-based path optimisation against a distance field.

Paths minimise a second-difference smoothness term plus a hinge-squared
obstacle term whose gradient is the field's repulsive direction.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from gpfield.utils.pointcloud import format_float

logger = logging.getLogger(__name__)

# Lateral deflections tried when the straight-line solution stays in collision,
# as fractions of the start-goal distance
RESTART_AMPLITUDES = (0.25, -0.25, 0.5, -0.5)

_MAX_HALVINGS = 30


class PlanConfig(BaseModel):
    """
    Path optimisation settings.

    Attributes:
        num_waypoints: Number of waypoints M including both endpoints
        safety_margin: Clearance epsilon below which the obstacle cost is active
        smoothness_weight: Weight of the second-difference term
        obstacle_weight: Weight of the obstacle term
        step_size: Initial gradient step of every iteration
        max_iters: Iteration cap
        cost_tol: Stop when an accepted step changes the cost by less than this
        restarts: Retry from deflected paths when the result violates the margin
    """

    model_config = ConfigDict(frozen=True)

    num_waypoints: int = Field(default=50, ge=3)
    safety_margin: float = Field(default=0.2, gt=0)
    smoothness_weight: float = Field(default=1.0, gt=0)
    obstacle_weight: float = Field(default=10.0, gt=0)
    step_size: float = Field(default=0.05, gt=0)
    max_iters: int = Field(default=500, gt=0)
    cost_tol: float = Field(default=1e-6, gt=0)
    restarts: bool = True


@dataclass
class Trajectory:
    """
    Ordered waypoints with fixed endpoints.

    Attributes:
        waypoints: M x D array; the first and last rows are the requested start and goal
        fixed_endpoints: Whether the optimiser kept the endpoints fixed
    """

    waypoints: np.ndarray
    fixed_endpoints: bool = True

    @property
    def start(self) -> np.ndarray:
        return self.waypoints[0]

    @property
    def goal(self) -> np.ndarray:
        return self.waypoints[-1]

    def reversed(self) -> "Trajectory":
        return Trajectory(self.waypoints[::-1].copy(), self.fixed_endpoints)


def _cost_and_grad(field, X: np.ndarray, cfg: PlanConfig) -> Tuple[float, np.ndarray]:
    D2 = X[2:] - 2.0 * X[1:-1] + X[:-2]
    smooth = cfg.smoothness_weight * float(np.sum(D2 * D2))
    G2 = 2.0 * cfg.smoothness_weight * D2
    grad = np.zeros_like(X)
    grad[2:] += G2
    grad[1:-1] -= 2.0 * G2
    grad[:-2] += G2

    samples = field.evaluate(X[1:-1])
    penetration = np.maximum(cfg.safety_margin - samples.distance, 0.0)
    obstacle = cfg.obstacle_weight * float(np.sum(penetration**2))
    push = np.where(samples.valid_gradient, penetration, 0.0)
    grad[1:-1] -= 2.0 * cfg.obstacle_weight * push[:, None] * samples.gradient

    grad[0] = 0.0
    grad[-1] = 0.0
    return smooth + obstacle, grad


def _optimise(
    field, X: np.ndarray, cfg: PlanConfig
) -> Tuple[np.ndarray, List[float]]:
    cost, grad = _cost_and_grad(field, X, cfg)
    history = [cost]
    for it in range(cfg.max_iters):
        step = cfg.step_size
        for _ in range(_MAX_HALVINGS):
            trial = X - step * grad
            trial_cost, trial_grad = _cost_and_grad(field, trial, cfg)
            if trial_cost <= cost:
                break
            step *= 0.5
        else:
            logger.debug(f"Line search exhausted at iteration {it}")
            break
        delta = cost - trial_cost
        X, cost, grad = trial, trial_cost, trial_grad
        history.append(cost)
        if delta < cfg.cost_tol:
            break
    return X, history


def _lateral_direction(direction: np.ndarray) -> np.ndarray:
    """Unit vector perpendicular to direction; in 2D the left-hand normal."""
    unit = direction / np.linalg.norm(direction)
    if len(unit) == 2:
        return np.array([-unit[1], unit[0]])
    axis = np.zeros_like(unit)
    axis[int(np.argmin(np.abs(unit)))] = 1.0
    lateral = np.cross(unit, axis)
    return lateral / np.linalg.norm(lateral)


def _initial_path(start: np.ndarray, goal: np.ndarray, m: int, amplitude: float) -> np.ndarray:
    s = np.linspace(0.0, 1.0, m)
    X = start[None, :] + s[:, None] * (goal - start)[None, :]
    if amplitude != 0.0:
        direction = goal - start
        length = float(np.linalg.norm(direction))
        lateral = _lateral_direction(direction)
        X = X + (amplitude * length * np.sin(np.pi * s))[:, None] * lateral[None, :]
    X[0] = start
    X[-1] = goal
    return X


def path_clearance(field, traj: Trajectory) -> float:
    """Minimum field distance over waypoints and segment midpoints."""
    X = np.asarray(traj.waypoints, dtype=float)
    mids = 0.5 * (X[1:] + X[:-1])
    return float(np.min(field.distances(np.vstack([X, mids]))))


def plan_path(
    field,
    start: Sequence[float],
    goal: Sequence[float],
    cfg: Optional[PlanConfig] = None,
) -> Tuple[Trajectory, List[float]]:
    """
    Optimise a collision-free path between two points.

    Args:
        field: Field or SubmapGrid
        start: Start point
        goal: Goal point
        cfg: Optimisation settings

    Returns:
        Tuple: (trajectory, cost history of accepted iterations)

    Raises:
        ValueError: If start equals goal or an endpoint lies within half the margin
    """
    cfg = cfg or PlanConfig()
    start = np.asarray(start, dtype=float).reshape(-1)
    goal = np.asarray(goal, dtype=float).reshape(-1)
    if start.shape != goal.shape or start.shape[0] != field.dim:
        raise ValueError(f"start and goal must be {field.dim}D points")
    if not (np.all(np.isfinite(start)) and np.all(np.isfinite(goal))):
        raise ValueError("start and goal must be finite")
    if np.array_equal(start, goal):
        raise ValueError("start and goal coincide")
    ends = field.distances(np.vstack([start, goal]))
    if np.any(ends < 0.5 * cfg.safety_margin):
        raise ValueError("endpoint in collision margin")

    amplitudes = [0.0]
    if cfg.restarts:
        amplitudes.extend(RESTART_AMPLITUDES)

    attempts = []
    for amplitude in amplitudes:
        X, history = _optimise(
            field, _initial_path(start, goal, cfg.num_waypoints, amplitude), cfg
        )
        X[0], X[-1] = start, goal
        traj = Trajectory(X)
        clearance = path_clearance(field, traj)
        attempts.append((traj, history, clearance))
        logger.debug(
            f"Attempt amplitude={amplitude}: cost={history[-1]:.6g} clearance={clearance:.4f}"
        )
        if clearance >= 0.9 * cfg.safety_margin:
            break
        if cfg.restarts:
            logger.warning(f"Path clearance {clearance:.3f} below margin, restarting")

    feasible = [a for a in attempts if a[2] >= 0.9 * cfg.safety_margin]
    if feasible:
        traj, history, clearance = min(feasible, key=lambda a: a[1][-1])
    else:
        traj, history, clearance = max(attempts, key=lambda a: a[2])
    logger.info(
        f"Plan finished: {len(history) - 1} iterations, cost={history[-1]:.6g}, "
        f"clearance={clearance:.4f}"
    )
    return traj, history


def write_path(path: Union[str, Path], traj: Trajectory) -> None:
    """One waypoint per line, "x y [z]"."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in traj.waypoints:
            fh.write(" ".join(format_float(v) for v in row) + "\n")


def write_cost_history(path: Union[str, Path], history: Sequence[float]) -> None:
    """CSV with header "iter,cost"."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iter,cost\n")
        for i, cost in enumerate(history):
            fh.write(f"{i},{format_float(cost)}\n")
