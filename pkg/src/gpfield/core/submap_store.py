"""
Block-partitioned store of conditionally independent GP submaps.

Points are hashed into cubic blocks of side B. Each block owns its points and
lazily fits a distance field on them plus the halo of neighbouring points
within m of its box. Queries fuse nearby blocks in occupancy space.
"""

import itertools
import logging
import math
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Set, Tuple

import numpy as np

from gpfield.core.distance_field import (
    Field,
    FieldConfig,
    FieldSample,
    FieldSamples,
    build_field,
    sample_from_moments,
)
from gpfield.core.odometry import Pose

logger = logging.getLogger(__name__)

BlockKey = Tuple[int, ...]

_WEIGHT_EPSILON = 1e-9


class FusionWeighting(str, Enum):
    """
    How overlapping blocks are weighted in occupancy space.

    PRIOR_GAIN weights each member by the precision it gained over the prior,
    (sigma^2 - var) / (var sigma^2), so blocks that never saw the query region
    drop out. PRECISION uses the plain inverse posterior variance 1 / (var + eps).
    """

    PRIOR_GAIN = "prior-gain"
    PRECISION = "precision"


@dataclass
class Submap:
    """
    One block of the grid.

    Attributes:
        key: Integer block coordinates
        points: Points owned by this block, in insertion order
        fitted: Fitted field, None until the first refit
        dirty: Whether the field must be refit before the next query
    """

    key: BlockKey
    points: List[np.ndarray] = field(default_factory=list)
    fitted: Optional[Field] = None
    dirty: bool = True
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def point_array(self, dim: int) -> np.ndarray:
        if not self.points:
            return np.empty((0, dim))
        return np.vstack(self.points)


@dataclass
class InsertReport:
    """
    Outcome of a scan insertion.

    Attributes:
        accepted: Points stored in a block
        skipped_nonfinite: Points dropped for non-finite coordinates
        downsampled: Points dropped by the voxel filter or the block capacity
        dirty_blocks: Blocks marked for refit by this insertion
    """

    accepted: int = 0
    skipped_nonfinite: int = 0
    downsampled: int = 0
    dirty_blocks: int = 0


class SubmapGrid:
    """
    Spatial hash of GP submaps.

    Single writer (insert_points) and many readers (query_fused); a query that
    triggers a lazy refit holds only that block's lock.
    """

    def __init__(
        self,
        config: FieldConfig,
        dim: int,
        block_size: Optional[float] = None,
        halo_margin: Optional[float] = None,
        max_points_per_block: int = 400,
        downsample_resolution: Optional[float] = None,
        fusion: FusionWeighting = FusionWeighting.PRIOR_GAIN,
    ):
        """
        Initialize an empty grid.

        Args:
            config: Field configuration shared by every block
            dim: Spatial dimension (2 or 3)
            block_size: Block side B, default 8 l
            halo_margin: Halo width m, default 2 l
            max_points_per_block: Capacity of each block after downsampling
            downsample_resolution: Voxel size rho, default l / 4
            fusion: Weighting used when several blocks answer a query
        """
        if dim not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {dim}")
        l = config.kernel.length_scale
        self.config = config
        self.dim = dim
        self.block_size = float(block_size if block_size is not None else 8.0 * l)
        self.halo_margin = float(halo_margin if halo_margin is not None else 2.0 * l)
        self.max_points_per_block = int(max_points_per_block)
        self.fusion = FusionWeighting(fusion)
        self.downsample_resolution = float(
            downsample_resolution if downsample_resolution is not None else 0.25 * l
        )
        if self.block_size <= 0:
            raise ValueError("block size must be positive")
        if self.halo_margin < 0:
            raise ValueError("halo margin must be non-negative")
        if self.max_points_per_block < 1:
            raise ValueError("max points per block must be at least 1")
        self.blocks: Dict[BlockKey, Submap] = {}
        self._voxels: Set[BlockKey] = set()
        self._reach = max(1, math.ceil(self.halo_margin / self.block_size))
        logger.info(
            f"SubmapGrid initialized: B={self.block_size:.4g} m={self.halo_margin:.4g} "
            f"N_max={self.max_points_per_block} rho={self.downsample_resolution:.4g} "
            f"fusion={self.fusion.value}"
        )

    @property
    def point_count(self) -> int:
        return sum(len(b.points) for b in self.blocks.values())

    def block_of(self, p: np.ndarray) -> BlockKey:
        """Integer coordinates of the half-open block containing p."""
        return tuple(int(k) for k in np.floor(np.asarray(p, dtype=float) / self.block_size))

    def block_center(self, key: BlockKey) -> np.ndarray:
        return (np.asarray(key, dtype=float) + 0.5) * self.block_size

    def _box_distance(self, key: BlockKey, p: np.ndarray) -> float:
        lo = np.asarray(key, dtype=float) * self.block_size
        hi = lo + self.block_size
        gap = np.maximum(np.maximum(lo - p, p - hi), 0.0)
        return float(np.linalg.norm(gap))

    def _neighbour_keys(self, key: BlockKey) -> List[BlockKey]:
        offsets = itertools.product(range(-self._reach, self._reach + 1), repeat=self.dim)
        return [
            tuple(k + o for k, o in zip(key, off)) for off in offsets if any(off)
        ]

    def _voxel_of(self, p: np.ndarray) -> BlockKey:
        if self.downsample_resolution <= 0:
            return tuple(p.tolist())
        return tuple(int(k) for k in np.floor(p / self.downsample_resolution))

    def insert_points(self, cloud, pose: Optional[Pose] = None) -> InsertReport:
        """
        Insert a sensor-frame cloud observed from the given pose.

        Args:
            cloud: PointCloud or (N x D) array in the sensor frame
            pose: Sensor-to-world transform, identity when omitted

        Returns:
            InsertReport: Counts of accepted, skipped and downsampled points
        """
        points = np.asarray(getattr(cloud, "points", cloud), dtype=float)
        report = InsertReport()
        if points.size == 0:
            return report
        points = points.reshape(-1, self.dim) if points.ndim == 1 else points
        if points.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim}D points, got shape {points.shape}")

        finite = np.all(np.isfinite(points), axis=1)
        report.skipped_nonfinite = int((~finite).sum())
        if report.skipped_nonfinite:
            logger.warning(f"Skipped {report.skipped_nonfinite} non-finite points")
        world = points[finite]
        if pose is not None:
            world = pose.apply(world)

        dirty: Set[BlockKey] = set()
        for p in world:
            voxel = self._voxel_of(p)
            key = self.block_of(p)
            block = self.blocks.get(key)
            if voxel in self._voxels or (
                block is not None and len(block.points) >= self.max_points_per_block
            ):
                report.downsampled += 1
                continue
            if block is None:
                block = self.blocks[key] = Submap(key=key)
            self._voxels.add(voxel)
            block.points.append(p.copy())
            report.accepted += 1
            dirty.add(key)
            for other in self._neighbour_keys(key):
                if other in self.blocks and self._box_distance(other, p) <= self.halo_margin:
                    dirty.add(other)

        for key in dirty:
            self.blocks[key].dirty = True
        report.dirty_blocks = len(dirty)
        logger.debug(
            f"Inserted {report.accepted} points, {report.downsampled} downsampled, "
            f"{report.dirty_blocks} blocks dirty"
        )
        return report

    def adopt_block(self, key: BlockKey, points: np.ndarray) -> None:
        """Install a stored block verbatim, bypassing the voxel filter."""
        key = tuple(int(k) for k in key)
        block = self.blocks[key] = Submap(key=key)
        for p in np.asarray(points, dtype=float).reshape(-1, self.dim):
            block.points.append(p.copy())
            self._voxels.add(self._voxel_of(p))

    def training_points(self, key: BlockKey) -> np.ndarray:
        """Own points of a block followed by halo points from its neighbours."""
        own = self.blocks[key].point_array(self.dim)
        halo = []
        for other in sorted(self._neighbour_keys(key)):
            neighbour = self.blocks.get(other)
            if neighbour is None or not neighbour.points:
                continue
            for p in neighbour.points:
                if self._box_distance(key, p) <= self.halo_margin:
                    halo.append(p)
        if halo:
            return np.vstack([own, np.vstack(halo)])
        return own

    def _refit(self, block: Submap) -> Field:
        with block.lock:
            if block.dirty or block.fitted is None:
                block.fitted = build_field(self.training_points(block.key), self.config)
                block.dirty = False
                logger.debug(f"Refit block {block.key} on {block.fitted.model.size} points")
            return block.fitted

    def refit_dirty(self) -> int:
        """Refit every dirty block now; returns how many were refit."""
        count = 0
        for key in sorted(self.blocks):
            block = self.blocks[key]
            if block.points and block.dirty:
                self._refit(block)
                count += 1
        return count

    def members(self, q: np.ndarray) -> List[BlockKey]:
        """Non-empty blocks whose centres lie within B sqrt(dim) of q, sorted."""
        occupied = sorted(k for k, b in self.blocks.items() if b.points)
        if not occupied:
            raise ValueError("submap grid is empty")
        radius = self.block_size * math.sqrt(self.dim)
        dists = {k: float(np.linalg.norm(self.block_center(k) - q)) for k in occupied}
        near = [k for k in occupied if dists[k] <= radius]
        if near:
            return near
        return [min(occupied, key=lambda k: (dists[k], k))]

    def query_fused(self, q: np.ndarray) -> FieldSample:
        """
        Evaluate the fused field at q.

        Member means, gradients and variances are averaged in occupancy space
        with the grid's FusionWeighting; the variant transform is then applied
        to the fused occupancy. A lone member answers with its own query.

        Raises:
            ValueError: If the grid holds no points or q is malformed
        """
        q = np.asarray(q, dtype=float).reshape(-1)
        if q.shape[0] != self.dim or not np.all(np.isfinite(q)):
            raise ValueError(f"query must be a finite {self.dim}D point")
        keys = self.members(q)
        fields = [self._refit(self.blocks[k]) for k in keys]
        if len(fields) == 1:
            return fields[0].query(q)

        Q = q.reshape(1, -1)
        s2 = self.config.kernel.signal_variance
        means, grads, variances, gains = [], [], [], []
        coincident = False
        for f in fields:
            m, g, var, explained = f.moments(Q)
            means.append(m[0])
            grads.append(g[0])
            variances.append(var[0])
            gains.append(max(explained[0], 0.0))
            coincident = coincident or bool(f.coincident(Q)[0])

        var_arr = np.asarray(variances)
        precision = 1.0 / (var_arr + _WEIGHT_EPSILON)
        if self.fusion == FusionWeighting.PRECISION:
            weights = precision
        else:
            weights = np.asarray(gains) * precision / (s2 + _WEIGHT_EPSILON)
            if not weights.sum() > 0:
                weights = precision
        weights = weights / weights.sum()

        mean = float(weights @ np.asarray(means))
        grad = weights @ np.vstack(grads)
        variance = float(weights @ var_arr)
        samples = sample_from_moments(
            self.config,
            np.array([mean]),
            grad.reshape(1, -1),
            np.array([variance]),
            np.array([coincident]),
        )
        return samples[0]

    def evaluate(self, qs: np.ndarray) -> FieldSamples:
        """Fused samples for every row of qs."""
        Q = np.asarray(qs, dtype=float).reshape(-1, self.dim)
        rows = [self.query_fused(q) for q in Q]
        if not rows:
            empty = np.empty(0)
            return FieldSamples(
                empty, np.empty((0, self.dim)), np.empty((0, self.dim)), empty, empty,
                np.empty(0, dtype=bool),
            )
        return FieldSamples(
            distance=np.array([r.distance for r in rows]),
            gradient=np.vstack([r.gradient for r in rows]),
            normal=np.vstack([r.normal for r in rows]),
            occupancy=np.array([r.occupancy for r in rows]),
            uncertainty=np.array([r.uncertainty for r in rows]),
            valid_gradient=np.array([r.valid_gradient for r in rows], dtype=bool),
        )

    def distances(self, qs: np.ndarray) -> np.ndarray:
        return self.evaluate(qs).distance

    def query(self, q: np.ndarray) -> FieldSample:
        return self.query_fused(q)


def block_of(grid: SubmapGrid, p: np.ndarray) -> BlockKey:
    return grid.block_of(p)


def insert_points(grid: SubmapGrid, cloud, pose: Optional[Pose] = None) -> InsertReport:
    return grid.insert_points(cloud, pose)


def query_fused(grid: SubmapGrid, q: np.ndarray) -> FieldSample:
    return grid.query_fused(q)
