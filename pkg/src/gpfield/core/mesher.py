"""
Iso-surface and contour extraction from a distance field.

The field is sampled on a regular grid and the offset level set d = tau is
extracted: marching cubes in 3D, marching squares in 2D. Because the field is
unsigned, the result is a shell at distance tau around the surface.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from skimage import measure

from gpfield.utils.pointcloud import format_float

logger = logging.getLogger(__name__)

MAX_GRID_CELLS = 100_000_000

EdgeKey = Tuple[str, int, int]


class GridSpec(BaseModel):
    """
    Regular sampling grid.

    Attributes:
        bbox_min: Lower corner
        bbox_max: Upper corner
        cell: Node spacing h
        iso: Iso level tau, defaults to the cell size
    """

    model_config = ConfigDict(frozen=True)

    bbox_min: Tuple[float, ...]
    bbox_max: Tuple[float, ...]
    cell: float = Field(gt=0, allow_inf_nan=False)
    iso: Optional[float] = Field(default=None, gt=0, allow_inf_nan=False)

    @model_validator(mode="after")
    def check_box(self) -> "GridSpec":
        if len(self.bbox_min) != len(self.bbox_max) or len(self.bbox_min) not in (2, 3):
            raise ValueError("bbox corners must both be 2D or both be 3D")
        if any(not (hi > lo) for lo, hi in zip(self.bbox_min, self.bbox_max)):
            raise ValueError("bbox max must exceed min on every axis")
        return self

    @property
    def dim(self) -> int:
        return len(self.bbox_min)

    @property
    def level(self) -> float:
        return self.iso if self.iso is not None else self.cell

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(
            int(np.floor((hi - lo) / self.cell + 1e-9)) + 1
            for lo, hi in zip(self.bbox_min, self.bbox_max)
        )

    @property
    def cell_count(self) -> int:
        return int(np.prod([max(n - 1, 0) for n in self.shape], dtype=float))

    def axes(self) -> List[np.ndarray]:
        return [lo + self.cell * np.arange(n) for lo, n in zip(self.bbox_min, self.shape)]

    def nodes(self) -> np.ndarray:
        """All grid nodes in raster ('ij', C) order, one per row."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)


@dataclass
class TriangleMesh:
    """
    Indexed triangle mesh.

    Attributes:
        vertices: V x 3 array
        triangles: F x 3 integer array of vertex indices
    """

    vertices: np.ndarray
    triangles: np.ndarray

    @classmethod
    def empty(cls) -> "TriangleMesh":
        return cls(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))

    def __len__(self) -> int:
        return len(self.triangles)


def _sample_grid(field, grid: GridSpec, max_cells: int) -> np.ndarray:
    if grid.dim != field.dim:
        raise ValueError(f"grid is {grid.dim}D but the field is {field.dim}D")
    if grid.cell_count > max_cells:
        raise ValueError("grid too large")
    values = field.distances(grid.nodes()) - grid.level
    return values.reshape(grid.shape)


def extract_isosurface_3d(
    field, grid: GridSpec, max_cells: int = MAX_GRID_CELLS
) -> TriangleMesh:
    """
    Marching cubes over d - tau.

    Returns an empty mesh when the sampled values do not change sign.

    Raises:
        ValueError: If the grid exceeds max_cells or is not 3D
    """
    if grid.dim != 3:
        raise ValueError("isosurface extraction needs a 3D grid")
    volume = _sample_grid(field, grid, max_cells)
    if not (volume.min() < 0.0 < volume.max()):
        logger.info("No iso crossing inside the grid, mesh is empty")
        return TriangleMesh.empty()

    verts, faces, _normals, _values = measure.marching_cubes(
        volume, level=0.0, spacing=(grid.cell,) * 3, allow_degenerate=False
    )
    verts = verts + np.asarray(grid.bbox_min)[None, :]
    faces = faces.astype(np.int64)
    keep = (
        (faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 0] != faces[:, 2])
    )
    mesh = TriangleMesh(vertices=verts.astype(float), triangles=faces[keep])
    logger.info(f"Extracted mesh: {len(mesh.vertices)} vertices, {len(mesh.triangles)} triangles")
    return mesh


# Corners in counter-clockwise order and the two cell edges touching each one
_CORNERS = ((0, 0), (1, 0), (1, 1), (0, 1))
_CORNER_EDGES = {
    0: ("bottom", "left"),
    1: ("bottom", "right"),
    2: ("right", "top"),
    3: ("top", "left"),
}


def _edge_key(i: int, j: int, side: str) -> EdgeKey:
    if side == "bottom":
        return ("h", i, j)
    if side == "top":
        return ("h", i, j + 1)
    if side == "left":
        return ("v", i, j)
    return ("v", i + 1, j)


def _edge_point(key: EdgeKey, values: np.ndarray, axes: List[np.ndarray]) -> np.ndarray:
    kind, i, j = key
    a = (i, j)
    b = (i + 1, j) if kind == "h" else (i, j + 1)
    va, vb = values[a], values[b]
    t = va / (va - vb)
    pa = np.array([axes[0][a[0]], axes[1][a[1]]])
    pb = np.array([axes[0][b[0]], axes[1][b[1]]])
    return pa + t * (pb - pa)


def _link_segments(segments: List[Tuple[EdgeKey, EdgeKey]]) -> List[List[EdgeKey]]:
    neighbours: Dict[EdgeKey, List[EdgeKey]] = {}
    for a, b in segments:
        neighbours.setdefault(a, []).append(b)
        neighbours.setdefault(b, []).append(a)

    visited = set()
    chains: List[List[EdgeKey]] = []

    def walk(first: EdgeKey) -> List[EdgeKey]:
        chain = [first]
        visited.add(first)
        current = first
        while True:
            nxt = [n for n in sorted(neighbours[current]) if n not in visited]
            if not nxt:
                break
            current = nxt[0]
            visited.add(current)
            chain.append(current)
        if len(chain) > 2 and first in neighbours[current]:
            chain.append(first)
        return chain

    for key in sorted(k for k, v in neighbours.items() if len(v) == 1):
        if key not in visited:
            chains.append(walk(key))
    for key in sorted(neighbours):
        if key not in visited:
            chains.append(walk(key))
    return chains


def extract_contour_2d(
    field, grid: GridSpec, max_cells: int = MAX_GRID_CELLS
) -> List[np.ndarray]:
    """
    Marching squares over d - tau.

    Saddle cells are resolved by sampling the field at the cell centre. Each
    polyline is a K x 2 array; closed loops repeat their first point.

    Raises:
        ValueError: If the grid exceeds max_cells or is not 2D
    """
    if grid.dim != 2:
        raise ValueError("contour extraction needs a 2D grid")
    values = _sample_grid(field, grid, max_cells)
    inside = values < 0.0
    axes = grid.axes()
    nx, ny = values.shape

    segments: List[Tuple[EdgeKey, EdgeKey]] = []
    saddles: List[Tuple[int, int, Tuple[bool, ...]]] = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            corners = tuple(bool(inside[i + di, j + dj]) for di, dj in _CORNERS)
            n_in = sum(corners)
            if n_in in (0, 4):
                continue
            if n_in == 2 and corners[0] == corners[2]:
                saddles.append((i, j, corners))
                continue
            # minority corners are cut off one by one
            minority = n_in <= 2
            cut = [c for c in range(4) if corners[c] == minority]
            if len(cut) == 1:
                a, b = _CORNER_EDGES[cut[0]]
                segments.append((_edge_key(i, j, a), _edge_key(i, j, b)))
            else:
                crossing = [
                    side for side, (p, q) in
                    (("bottom", (0, 1)), ("right", (1, 2)), ("top", (2, 3)), ("left", (3, 0)))
                    if corners[p] != corners[q]
                ]
                segments.append((_edge_key(i, j, crossing[0]), _edge_key(i, j, crossing[1])))

    if saddles:
        centres = np.array(
            [[axes[0][i] + 0.5 * grid.cell, axes[1][j] + 0.5 * grid.cell] for i, j, _ in saddles]
        )
        centre_inside = field.distances(centres) - grid.level < 0.0
        for (i, j, corners), c_in in zip(saddles, centre_inside):
            for c in range(4):
                if corners[c] != bool(c_in):
                    a, b = _CORNER_EDGES[c]
                    segments.append((_edge_key(i, j, a), _edge_key(i, j, b)))

    chains = _link_segments(segments)
    cache: Dict[EdgeKey, np.ndarray] = {}
    polylines = []
    for chain in chains:
        pts = []
        for key in chain:
            if key not in cache:
                cache[key] = _edge_point(key, values, axes)
            pts.append(cache[key])
        polylines.append(np.vstack(pts))
    logger.info(f"Extracted {len(polylines)} contour polylines")
    return polylines


def polyline_length(polyline: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(np.diff(polyline, axis=0), axis=1)))


def write_mesh_ply(path: Union[str, Path], mesh: TriangleMesh) -> None:
    """Text PLY with vertex x/y/z and face vertex_indices."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(mesh.vertices)}\n")
        fh.write("property double x\nproperty double y\nproperty double z\n")
        fh.write(f"element face {len(mesh.triangles)}\n")
        fh.write("property list uchar int vertex_indices\n")
        fh.write("end_header\n")
        for v in mesh.vertices:
            fh.write(" ".join(format_float(c) for c in v) + "\n")
        for f in mesh.triangles:
            fh.write(f"3 {int(f[0])} {int(f[1])} {int(f[2])}\n")


def write_polylines(path: Union[str, Path], polylines: List[np.ndarray]) -> None:
    """Blocks of "x y" lines separated by blank lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for k, line in enumerate(polylines):
            if k:
                fh.write("\n")
            for p in line:
                fh.write(" ".join(format_float(c) for c in p) + "\n")
