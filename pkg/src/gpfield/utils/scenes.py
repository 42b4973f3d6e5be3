"""Synthetic surface samples for tests, benchmarks and demos."""

import math
from typing import Callable, Dict, Optional, Sequence

import numpy as np


def _jitter(points: np.ndarray, noise: float, rng: Optional[np.random.Generator]) -> np.ndarray:
    if noise <= 0:
        return points
    rng = rng if rng is not None else np.random.default_rng(0)
    return points + rng.normal(scale=noise, size=points.shape)


def unit_circle(
    n: int = 256,
    radius: float = 1.0,
    center: Sequence[float] = (0.0, 0.0),
    noise: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """n evenly spaced samples of a circle, starting on the +x axis."""
    theta = 2.0 * np.pi * np.arange(n) / n
    pts = np.column_stack([np.cos(theta), np.sin(theta)]) * radius + np.asarray(center)
    return _jitter(pts, noise, rng)


def disc_ring(
    n: int = 128,
    radius: float = 0.5,
    center: Sequence[float] = (0.0, 0.0),
    noise: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Boundary samples of a disc obstacle."""
    return unit_circle(n, radius, center, noise, rng)


def fibonacci_sphere(
    n: int = 1000,
    radius: float = 1.0,
    noise: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Near-uniform samples of a sphere on the golden-angle spiral."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), z]) * radius
    return _jitter(pts, noise, rng)


def l_shape(
    points_per_wall: int = 150,
    length: float = 1.5,
    noise: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Two perpendicular walls meeting at the origin, along +x and +y."""
    step = length / points_per_wall
    along = np.arange(points_per_wall) * step
    wall_x = np.column_stack([along, np.zeros(points_per_wall)])
    wall_y = np.column_stack([np.zeros(points_per_wall), along + step])
    return _jitter(np.vstack([wall_x, wall_y]), noise, rng)


SCENES: Dict[str, Callable[..., np.ndarray]] = {
    "circle": unit_circle,
    "disc": disc_ring,
    "sphere": fibonacci_sphere,
    "lshape": l_shape,
}
