"""
Stationary covariance functions and their reverting inverses.

This module provides the Matern and squared-exponential kernels used by the
Gaussian-process fields, their spatial derivatives, and the reverting
functions that map an occupancy value back to a metric distance.
"""

import logging
import math
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.distance import cdist

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Occupancies are clamped to this fraction of the signal variance before any log/inverse.
OCCUPANCY_FLOOR = 1e-12

SQRT3 = math.sqrt(3.0)

_NEWTON_TOLERANCE = 1e-12
_NEWTON_MAX_ITERS = 50
_NEWTON_UPPER_BRACKET = 50.0


class KernelFamily(str, Enum):
    """Supported kernel families."""

    MATERN12 = "matern12"
    MATERN32 = "matern32"
    SQUARED_EXPONENTIAL = "se"


class KernelSpec(BaseModel):
    """
    Hyperparameters of a stationary kernel.

    Attributes:
        family: Kernel family
        length_scale: Length scale l in meters
        signal_variance: Prior variance sigma^2 (kernel value at zero distance)
        logpis_rate: Decay rate lambda used by the logarithmic transform; defaults
            to the rate tied to the family and length scale
    """

    model_config = ConfigDict(frozen=True)

    family: KernelFamily = KernelFamily.SQUARED_EXPONENTIAL
    length_scale: float = Field(default=1.0, gt=0, allow_inf_nan=False)
    signal_variance: float = Field(default=1.0, gt=0, allow_inf_nan=False)
    logpis_rate: Optional[float] = Field(default=None, gt=0, allow_inf_nan=False)

    @classmethod
    def for_log_gpis(
        cls, family: KernelFamily, rate: float, signal_variance: float = 1.0
    ) -> "KernelSpec":
        """Build a Matern kernel whose tail decays as exp(-rate * r)."""
        if family == KernelFamily.SQUARED_EXPONENTIAL:
            raise ValueError("log transform requires a Matern kernel")
        if not rate > 0:
            raise ValueError(f"rate must be positive, got {rate}")
        scale = 1.0 if family == KernelFamily.MATERN12 else SQRT3
        return cls(
            family=family,
            length_scale=scale / rate,
            signal_variance=signal_variance,
            logpis_rate=rate,
        )

    @property
    def tied_rate(self) -> float:
        """Tail decay rate implied by the length scale."""
        if self.family == KernelFamily.MATERN32:
            return SQRT3 / self.length_scale
        return 1.0 / self.length_scale

    @property
    def rate(self) -> float:
        """Decay rate used by the logarithmic transform."""
        return self.logpis_rate if self.logpis_rate is not None else self.tied_rate


def _as_point(x: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite coordinates")
    return arr


def _pair(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    pa = _as_point(a, "a")
    pb = _as_point(b, "b")
    if pa.shape != pb.shape:
        raise ValueError(f"dimension mismatch: {pa.shape[0]} vs {pb.shape[0]}")
    return pa, pb


def kernel_from_distance(spec: KernelSpec, r: ArrayLike) -> np.ndarray:
    """Evaluate the kernel as a function of Euclidean distance."""
    r = np.asarray(r, dtype=float)
    l = spec.length_scale
    s2 = spec.signal_variance
    if spec.family == KernelFamily.MATERN12:
        return s2 * np.exp(-r / l)
    if spec.family == KernelFamily.MATERN32:
        s = SQRT3 * r / l
        return s2 * (1.0 + s) * np.exp(-s)
    return s2 * np.exp(-0.5 * (r / l) ** 2)


def radial_factor(spec: KernelSpec, r: ArrayLike) -> np.ndarray:
    """
    Radial derivative divided by distance, (dk/dr) / r.

    The gradient with respect to the first argument is radial_factor(r) * (a - b).
    For Matern12 the factor is set to zero at r == 0.
    """
    r = np.asarray(r, dtype=float)
    l = spec.length_scale
    s2 = spec.signal_variance
    if spec.family == KernelFamily.MATERN12:
        with np.errstate(divide="ignore", invalid="ignore"):
            g = -s2 * np.exp(-r / l) / (l * r)
        return np.where(r > 0, g, 0.0)
    if spec.family == KernelFamily.MATERN32:
        return -3.0 * s2 / l**2 * np.exp(-SQRT3 * r / l)
    return -kernel_from_distance(spec, r) / l**2


def kernel_eval(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> float:
    """
    Covariance between two points.

    Args:
        spec: Kernel hyperparameters
        a: First point
        b: Second point

    Returns:
        float: Kernel value in (0, sigma^2]

    Raises:
        ValueError: On dimension mismatch or non-finite coordinates
    """
    pa, pb = _pair(a, b)
    if np.array_equal(pa, pb):
        return float(spec.signal_variance)
    return float(kernel_from_distance(spec, np.linalg.norm(pa - pb)))


def kernel_grad_x(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gradient of kernel_eval with respect to the first argument."""
    pa, pb = _pair(a, b)
    diff = pa - pb
    r = float(np.linalg.norm(diff))
    if r == 0.0:
        return np.zeros_like(pa)
    return float(radial_factor(spec, r)) * diff


def kernel_matrix(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Cross-covariance matrix between two point sets (rows are points)."""
    return kernel_from_distance(spec, cdist(A, B))


def _solve_matern32(log_u: np.ndarray) -> np.ndarray:
    """Solve (1 + t) exp(-t) = u for t > 0, given log(u) < 0."""
    lo = np.zeros_like(log_u)
    hi = np.full_like(log_u, _NEWTON_UPPER_BRACKET)
    t = np.clip(np.sqrt(-2.0 * log_u), 0.0, _NEWTON_UPPER_BRACKET)
    for _ in range(_NEWTON_MAX_ITERS):
        # log form: f is decreasing in t, so f > 0 means the root lies above t
        f = np.log1p(t) - t - log_u
        lo = np.where(f > 0, t, lo)
        hi = np.where(f > 0, hi, t)
        slope = -t / (1.0 + t)
        with np.errstate(divide="ignore", invalid="ignore"):
            candidate = t - f / slope
        outside = ~((candidate >= lo) & (candidate <= hi)) | (slope == 0)
        t_next = np.where(outside, 0.5 * (lo + hi), candidate)
        converged = np.abs(t_next - t) < _NEWTON_TOLERANCE
        t = t_next
        if np.all(converged):
            break
    else:
        logger.debug("Matern32 reverting solve hit the iteration cap")
    return t


def reverting_distance(spec: KernelSpec, occupancy: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """
    Invert the kernel profile: map an occupancy value to a distance.

    Occupancies at or above sigma^2 map to distance 0 with derivative 0. Values
    below the floor 1e-12 * sigma^2 are clamped to the floor and get derivative 0.

    Args:
        spec: Kernel hyperparameters
        occupancy: Scalar or array of occupancy values

    Returns:
        Tuple: (distance, d distance / d occupancy), same shape as the input

    Raises:
        ValueError: If any occupancy is non-finite
    """
    o = np.asarray(occupancy, dtype=float)
    scalar = o.ndim == 0
    o = np.atleast_1d(o)
    if not np.all(np.isfinite(o)):
        raise ValueError("occupancy must be finite")

    l = spec.length_scale
    s2 = spec.signal_variance
    floor = OCCUPANCY_FLOOR * s2
    clamped = np.clip(o, floor, s2)
    active = o < s2

    distance = np.zeros_like(o)
    slope = np.zeros_like(o)
    oa = clamped[active]
    log_u = np.log(oa / s2)

    if spec.family == KernelFamily.MATERN12:
        d = -l * log_u
        dd = -l / oa
    elif spec.family == KernelFamily.SQUARED_EXPONENTIAL:
        d = l * np.sqrt(np.maximum(-2.0 * log_u, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            dd = np.where(d > 0, -(l**2) / (oa * d), 0.0)
    else:
        t = _solve_matern32(np.minimum(log_u, 0.0))
        d = l * t / SQRT3
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            dd = np.where(t > 0, (l / SQRT3) * (-np.exp(t) / t) / s2, 0.0)

    distance[active] = d
    slope[active] = dd
    slope[o < floor] = 0.0

    if scalar:
        return float(distance[0]), float(slope[0])
    return distance, slope
