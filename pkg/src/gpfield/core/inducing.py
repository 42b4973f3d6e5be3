"""Surface-constrained pseudo point selection driven by the distance field."""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-3
DEFAULT_MAX_ITERS = 20

_MAX_HALVINGS = 10


@dataclass
class PseudoSet:
    """
    Selected pseudo points.

    Attributes:
        points: Accepted surface points (K x D)
        spacing: Minimum pairwise spacing enforced during selection
        residuals: |d| at each accepted point
    """

    points: np.ndarray
    spacing: float
    residuals: np.ndarray

    def __len__(self) -> int:
        return len(self.points)


def project_to_surface(
    field,
    x: np.ndarray,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOLERANCE,
) -> np.ndarray:
    """
    Slide a point onto the zero level set of the field.

    Each step is x <- x - d grad / max(|grad|^2, 1e-6), halved until |d| decreases.

    Args:
        field: Field or SubmapGrid
        x: Starting point
        max_iters: Iteration cap
        tol: Target |d|

    Returns:
        np.ndarray: A point with |d| < tol

    Raises:
        RuntimeError: If the gradient is unusable ("stalled projection") or the
            iteration cap is reached
    """
    x = np.asarray(x, dtype=float).reshape(-1).copy()
    if not np.all(np.isfinite(x)):
        raise ValueError("starting point must be finite")
    sample = field.query(x)
    for _ in range(max_iters):
        if abs(sample.distance) < tol:
            return x
        if not sample.valid_gradient:
            raise RuntimeError("stalled projection")
        g = sample.gradient
        step = sample.distance * g / max(float(g @ g), 1e-6)
        for _ in range(_MAX_HALVINGS + 1):
            trial = field.query(x - step)
            if abs(trial.distance) < abs(sample.distance):
                break
            step = 0.5 * step
        else:
            raise RuntimeError("stalled projection")
        x = x - step
        sample = trial
    if abs(sample.distance) < tol:
        return x
    raise RuntimeError(f"projection did not converge: residual {abs(sample.distance):.3g}")


def select_pseudo_points(
    field,
    candidates: np.ndarray,
    spacing: float,
    budget: int,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOLERANCE,
) -> PseudoSet:
    """
    Project candidates onto the surface and keep a well-spaced subset.

    Candidates are accepted greedily in input order when they lie at least
    spacing away from every accepted point, until the budget is met. Candidates
    whose projection fails are dropped.

    Raises:
        ValueError: If spacing or budget is not positive
        RuntimeError: If no candidate survives
    """
    if not spacing > 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    if budget < 1:
        raise ValueError(f"budget must be at least 1, got {budget}")

    C = np.asarray(getattr(candidates, "points", candidates), dtype=float)
    accepted: List[np.ndarray] = []
    residuals: List[float] = []
    failed = 0
    for c in C:
        if len(accepted) >= budget:
            break
        try:
            p = project_to_surface(field, c, max_iters=max_iters, tol=tol)
        except RuntimeError:
            failed += 1
            continue
        if accepted and np.min(np.linalg.norm(np.vstack(accepted) - p, axis=1)) < spacing:
            continue
        accepted.append(p)
        residuals.append(abs(field.query(p).distance))

    if failed:
        logger.warning(f"{failed} candidates failed to project onto the surface")
    if not accepted:
        raise RuntimeError("no pseudo points survived selection")
    logger.info(f"Selected {len(accepted)} pseudo points from {len(C)} candidates (s={spacing})")
    return PseudoSet(
        points=np.vstack(accepted), spacing=float(spacing), residuals=np.asarray(residuals)
    )
