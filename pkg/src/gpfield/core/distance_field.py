"""
Gaussian-process Euclidean distance fields.

A Field wraps a fitted GP occupancy model and turns its posterior into metric
distance, gradient, normal and an uncertainty proxy, using either the
logarithmic transform (Log-GPIS) or the kernel's reverting function.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field as PydanticField, model_validator
from scipy.spatial import KDTree

from gpfield.core.gp_regression import GpModel, deduplicate, fit
from gpfield.core.kernels import (
    OCCUPANCY_FLOOR,
    KernelFamily,
    KernelSpec,
    reverting_distance,
)

logger = logging.getLogger(__name__)

GRADIENT_EPSILON = 1e-12
MAX_GRADIENT_NORM = 10.0
COINCIDENCE_TOLERANCE = 1e-12

DEFAULT_NOISE_VARIANCE = 1e-4
DEFAULT_LENGTH_SCALE_FACTOR = 4.0


class FieldVariant(str, Enum):
    """Occupancy-to-distance transform."""

    LOG_GPIS = "loggpis"
    REVERTING = "reverting"


class FieldConfig(BaseModel):
    """
    Hyperparameters of a distance field.

    Attributes:
        variant: Which occupancy-to-distance transform to apply
        kernel: Kernel hyperparameters
        noise_variance: Observation noise variance of the occupancy GP
        uncertainty_beta: Number of posterior standard deviations in the uncertainty proxy
    """

    model_config = ConfigDict(frozen=True)

    variant: FieldVariant = FieldVariant.REVERTING
    kernel: KernelSpec = PydanticField(default_factory=KernelSpec)
    noise_variance: float = PydanticField(default=DEFAULT_NOISE_VARIANCE, ge=0, allow_inf_nan=False)
    uncertainty_beta: float = PydanticField(default=1.0, ge=0, allow_inf_nan=False)

    @model_validator(mode="after")
    def check_log_gpis_kernel(self) -> "FieldConfig":
        """The log transform needs a Matern kernel whose tail rate matches lambda."""
        if self.variant != FieldVariant.LOG_GPIS:
            return self
        if self.kernel.family == KernelFamily.SQUARED_EXPONENTIAL:
            raise ValueError("loggpis variant requires a Matern12 or Matern32 kernel")
        tied = self.kernel.tied_rate
        if abs(self.kernel.rate - tied) > 1e-9 * tied:
            raise ValueError(
                f"loggpis rate {self.kernel.rate} does not match length scale "
                f"{self.kernel.length_scale} (expected {tied})"
            )
        return self


@dataclass(frozen=True)
class FieldSample:
    """
    Distance field evaluated at one point.

    Attributes:
        distance: Unsigned distance in meters
        gradient: Gradient of the distance (direction of increasing distance)
        normal: Unit vector pointing toward the surface, zero when the gradient is invalid
        occupancy: Posterior occupancy clamped to [floor, sigma^2]
        uncertainty: Distance-unit uncertainty proxy
        valid_gradient: Whether the gradient and normal can be trusted
    """

    distance: float
    gradient: np.ndarray
    normal: np.ndarray
    occupancy: float
    uncertainty: float
    valid_gradient: bool


@dataclass(frozen=True)
class FieldSamples:
    """Struct-of-arrays batch of field samples, one row per query."""

    distance: np.ndarray
    gradient: np.ndarray
    normal: np.ndarray
    occupancy: np.ndarray
    uncertainty: np.ndarray
    valid_gradient: np.ndarray

    def __len__(self) -> int:
        return len(self.distance)

    def __getitem__(self, i: int) -> FieldSample:
        return FieldSample(
            distance=float(self.distance[i]),
            gradient=self.gradient[i].copy(),
            normal=self.normal[i].copy(),
            occupancy=float(self.occupancy[i]),
            uncertainty=float(self.uncertainty[i]),
            valid_gradient=bool(self.valid_gradient[i]),
        )

    def __iter__(self) -> Iterator[FieldSample]:
        for i in range(len(self)):
            yield self[i]


def occupancy_to_distance(
    config: FieldConfig, occupancy: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Apply the variant transform to clamped occupancies.

    Returns:
        Tuple: (distance, d distance / d occupancy)
    """
    o = np.asarray(occupancy, dtype=float)
    if config.variant == FieldVariant.LOG_GPIS:
        s2 = config.kernel.signal_variance
        rate = config.kernel.rate
        distance = np.maximum(-np.log(o / s2) / rate, 0.0)
        return distance, -1.0 / (rate * o)
    return reverting_distance(config.kernel, o)


def sample_from_moments(
    config: FieldConfig,
    mean: np.ndarray,
    grad_mean: np.ndarray,
    variance: np.ndarray,
    coincident: Optional[np.ndarray] = None,
) -> FieldSamples:
    """
    Turn posterior occupancy moments into field samples.

    Args:
        config: Field hyperparameters
        mean: Posterior occupancy means (M,)
        grad_mean: Gradients of the means (M x D)
        variance: Posterior occupancy variances (M,)
        coincident: Rows where the gradient is undefined because the query sits on a
            Matern12 training point

    Returns:
        FieldSamples: One sample per row
    """
    s2 = config.kernel.signal_variance
    floor = OCCUPANCY_FLOOR * s2
    mean = np.asarray(mean, dtype=float)
    grad_mean = np.asarray(grad_mean, dtype=float)

    occupancy = np.clip(mean, floor, s2)
    distance, slope = occupancy_to_distance(config, occupancy)
    slope = np.where(mean < floor, 0.0, slope)
    gradient = slope[:, None] * grad_mean

    spread = config.uncertainty_beta * np.sqrt(np.maximum(variance, 0.0))
    near, _ = occupancy_to_distance(config, np.clip(occupancy + spread, floor, s2))
    far, _ = occupancy_to_distance(config, np.clip(occupancy - spread, floor, s2))
    uncertainty = 0.5 * np.abs(far - near)

    mean_norm = np.linalg.norm(grad_mean, axis=1)
    valid = mean_norm >= GRADIENT_EPSILON
    if coincident is not None:
        valid &= ~coincident

    # Where the transform saturates or blows up, fall back to the unit Eikonal
    # direction, which points away from rising occupancy.
    grad_norm = np.linalg.norm(gradient, axis=1)
    gated = (
        (grad_norm > 0.0)
        & (grad_norm < MAX_GRADIENT_NORM)
        & np.all(np.isfinite(gradient), axis=1)
    )
    fallback = valid & ~gated
    if np.any(fallback):
        gradient[fallback] = -grad_mean[fallback] / mean_norm[fallback, None]
        logger.debug(f"Eikonal direction used for {int(fallback.sum())} samples")
    gradient = np.where(valid[:, None] & np.isfinite(gradient), gradient, 0.0)
    grad_norm = np.linalg.norm(gradient, axis=1)

    normal = np.zeros_like(gradient)
    normal[valid] = -gradient[valid] / grad_norm[valid, None]

    return FieldSamples(
        distance=distance,
        gradient=gradient,
        normal=normal,
        occupancy=occupancy,
        uncertainty=uncertainty,
        valid_gradient=valid,
    )


class Field:
    """
    Distance field backed by a GP occupancy model.

    The field is immutable once built; all query methods are read-only.
    """

    def __init__(self, model: GpModel, config: FieldConfig):
        """
        Initialize a field.

        Args:
            model: GP fitted to the surface points with unit targets
            config: Field hyperparameters used to fit the model
        """
        self.model = model
        self.config = config
        self._tree = KDTree(model.inputs)

    @property
    def dim(self) -> int:
        return self.model.dim

    @property
    def points(self) -> np.ndarray:
        return self.model.inputs

    def _queries(self, qs: np.ndarray) -> np.ndarray:
        Q = np.asarray(qs, dtype=float)
        if Q.size == 0:
            return np.empty((0, self.dim))
        if Q.ndim == 1:
            Q = Q.reshape(1, -1)
        if Q.ndim != 2 or Q.shape[1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got shape {Q.shape}")
        bad = np.flatnonzero(~np.all(np.isfinite(Q), axis=1))
        if bad.size:
            raise ValueError(f"query {int(bad[0])} has non-finite coordinates")
        return Q

    def coincident(self, Q: np.ndarray) -> np.ndarray:
        """Rows sitting on a training point of a Matern12 model (gradient undefined)."""
        if self.config.kernel.family != KernelFamily.MATERN12:
            return np.zeros(len(Q), dtype=bool)
        dist, _ = self._tree.query(Q, k=1)
        return np.asarray(dist) <= COINCIDENCE_TOLERANCE

    def moments(self, qs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Posterior occupancy mean, mean gradient, variance and explained variance."""
        Q = self._queries(qs)
        mean, grad = self.model.mean_and_grad(Q)
        explained = self.model.explained_variance(Q)
        s2 = self.config.kernel.signal_variance
        variance = np.clip(s2 - explained, 0.0, s2)
        return mean, grad, variance, explained

    def evaluate(self, qs: np.ndarray) -> FieldSamples:
        """Evaluate the field at every row of qs."""
        Q = self._queries(qs)
        if len(Q) == 0:
            return sample_from_moments(
                self.config, np.empty(0), np.empty((0, self.dim)), np.empty(0)
            )
        mean, grad = self.model.mean_and_grad(Q)
        variance = self.model.variance(Q)
        return sample_from_moments(self.config, mean, grad, variance, self.coincident(Q))

    def distances(self, qs: np.ndarray) -> np.ndarray:
        """Distances only, skipping the variance computation."""
        Q = self._queries(qs)
        if len(Q) == 0:
            return np.empty(0)
        s2 = self.config.kernel.signal_variance
        occupancy = np.clip(self.model.mean(Q), OCCUPANCY_FLOOR * s2, s2)
        distance, _ = occupancy_to_distance(self.config, occupancy)
        return np.asarray(distance)

    def query(self, q: np.ndarray) -> FieldSample:
        """Evaluate the field at a single point."""
        q = np.asarray(q, dtype=float)
        if q.ndim != 1:
            raise ValueError(f"expected a single point, got shape {q.shape}")
        return self.evaluate(q.reshape(1, -1))[0]

    def query_batch(self, qs) -> List[FieldSample]:
        """Evaluate the field at a list of points, preserving order."""
        if len(qs) == 0:
            return []
        return list(self.evaluate(np.asarray(qs, dtype=float)))


def median_spacing(points: np.ndarray) -> float:
    """Median nearest-neighbour distance of a point set (duplicates ignored)."""
    P = np.asarray(points, dtype=float)
    P = P[deduplicate(P)]
    if len(P) < 2:
        raise ValueError("need at least two distinct points to estimate spacing")
    dist, _ = KDTree(P).query(P, k=2)
    return float(np.median(dist[:, 1]))


def default_field_config(
    points: np.ndarray,
    variant: FieldVariant = FieldVariant.REVERTING,
    length_scale: Optional[float] = None,
    rate: Optional[float] = None,
    noise_variance: float = DEFAULT_NOISE_VARIANCE,
    length_scale_factor: float = DEFAULT_LENGTH_SCALE_FACTOR,
    uncertainty_beta: float = 1.0,
) -> FieldConfig:
    """
    Build a field configuration from the median-spacing heuristic.

    Reverting fields use an SE kernel; Log-GPIS fields use Matern12 with
    lambda = 1 / l. An explicit length scale or rate overrides the heuristic.
    """
    variant = FieldVariant(variant)
    if variant == FieldVariant.LOG_GPIS and rate is not None:
        kernel = KernelSpec.for_log_gpis(KernelFamily.MATERN12, rate)
    else:
        if length_scale is None:
            try:
                length_scale = length_scale_factor * median_spacing(points)
            except ValueError:
                length_scale = 1.0
                logger.warning("Too few points for the spacing heuristic, using l=1.0")
        if variant == FieldVariant.LOG_GPIS:
            kernel = KernelSpec.for_log_gpis(KernelFamily.MATERN12, 1.0 / length_scale)
        else:
            kernel = KernelSpec(
                family=KernelFamily.SQUARED_EXPONENTIAL, length_scale=length_scale
            )
    return FieldConfig(
        variant=variant,
        kernel=kernel,
        noise_variance=noise_variance,
        uncertainty_beta=uncertainty_beta,
    )


def build_field(
    cloud, config: Optional[FieldConfig] = None, chunk_size: int = 4096
) -> Field:
    """
    Fit a distance field to a point cloud.

    Args:
        cloud: PointCloud or (N x D) array of surface points
        config: Field hyperparameters; defaults from the median-spacing heuristic
        chunk_size: Query rows per vectorised block

    Returns:
        Field: The fitted field

    Raises:
        ValueError: If the cloud is empty
        RuntimeError: If the GP cannot be fitted
    """
    points = np.asarray(getattr(cloud, "points", cloud), dtype=float)
    if points.size == 0:
        raise ValueError("cannot build a field from an empty cloud")
    if points.ndim == 1:
        points = points.reshape(1, -1)
    if config is None:
        config = default_field_config(points)

    model = fit(
        points,
        np.ones(len(points)),
        config.kernel,
        noise_variance=config.noise_variance,
        chunk_size=chunk_size,
    )
    logger.info(
        f"Built {config.variant.value} field: {model.size} points, "
        f"{config.kernel.family.value} l={config.kernel.length_scale:.4g}"
    )
    return Field(model, config)
