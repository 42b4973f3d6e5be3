"""
Persistence of fields and submap grids.

Files are numpy npz containers holding a versioned JSON header plus the raw
training points; fields are refit deterministically on load.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from gpfield.core.distance_field import Field, FieldConfig, build_field
from gpfield.core.submap_store import FusionWeighting, SubmapGrid

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
FIELD_FORMAT = "gpfield.field"
GRID_FORMAT = "gpfield.grid"

PathLike = Union[str, Path]


def _write(path: PathLike, header: Dict[str, Any], **arrays: np.ndarray) -> None:
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)), **arrays)


def _read(path: PathLike) -> Dict[str, Any]:
    try:
        with np.load(path, allow_pickle=False) as data:
            contents = {name: data[name] for name in data.files}
    except (OSError, ValueError) as e:
        raise ValueError(f"{path}: not a gpfield model file ({e})")
    if "header" not in contents:
        raise ValueError(f"{path}: missing header")
    header = json.loads(str(contents.pop("header")))
    if header.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {header.get('version')}")
    contents["header"] = header
    return contents


def save_field(path: PathLike, field: Field) -> None:
    """Write a field's configuration and training points."""
    header = {
        "format": FIELD_FORMAT,
        "version": FORMAT_VERSION,
        "config": field.config.model_dump(mode="json"),
        "chunk_size": field.model.chunk_size,
    }
    _write(path, header, points=field.points)
    logger.info(f"Saved field with {field.model.size} points to {path}")


def _field_from(contents: Dict[str, Any]) -> Field:
    header = contents["header"]
    config = FieldConfig.model_validate(header["config"])
    return build_field(contents["points"], config, chunk_size=int(header["chunk_size"]))


def load_field(path: PathLike) -> Field:
    contents = _read(path)
    if contents["header"].get("format") != FIELD_FORMAT:
        raise ValueError(f"{path}: not a field file")
    return _field_from(contents)


def save_grid(path: PathLike, grid: SubmapGrid) -> None:
    """Write a grid's settings and every block's point buffer in key order."""
    keys = sorted(k for k, b in grid.blocks.items() if b.points)
    header = {
        "format": GRID_FORMAT,
        "version": FORMAT_VERSION,
        "config": grid.config.model_dump(mode="json"),
        "dim": grid.dim,
        "block_size": grid.block_size,
        "halo_margin": grid.halo_margin,
        "max_points_per_block": grid.max_points_per_block,
        "downsample_resolution": grid.downsample_resolution,
        "fusion": grid.fusion.value,
    }
    if keys:
        points = np.vstack([grid.blocks[k].point_array(grid.dim) for k in keys])
    else:
        points = np.empty((0, grid.dim))
    _write(
        path,
        header,
        block_keys=np.asarray(keys, dtype=np.int64).reshape(-1, grid.dim),
        block_counts=np.asarray([len(grid.blocks[k].points) for k in keys], dtype=np.int64),
        points=points,
    )
    logger.info(f"Saved submap grid with {len(keys)} blocks to {path}")


def _grid_from(contents: Dict[str, Any]) -> SubmapGrid:
    header = contents["header"]
    grid = SubmapGrid(
        FieldConfig.model_validate(header["config"]),
        dim=int(header["dim"]),
        block_size=float(header["block_size"]),
        halo_margin=float(header["halo_margin"]),
        max_points_per_block=int(header["max_points_per_block"]),
        downsample_resolution=float(header["downsample_resolution"]),
        fusion=FusionWeighting(header["fusion"]),
    )
    offset = 0
    for key, count in zip(contents["block_keys"], contents["block_counts"]):
        grid.adopt_block(tuple(key.tolist()), contents["points"][offset : offset + int(count)])
        offset += int(count)
    return grid


def load_grid(path: PathLike) -> SubmapGrid:
    contents = _read(path)
    if contents["header"].get("format") != GRID_FORMAT:
        raise ValueError(f"{path}: not a submap grid file")
    return _grid_from(contents)


def load_model(path: PathLike) -> Union[Field, SubmapGrid]:
    """Load whichever model type the file holds."""
    contents = _read(path)
    kind = contents["header"].get("format")
    if kind == FIELD_FORMAT:
        return _field_from(contents)
    if kind == GRID_FORMAT:
        return _grid_from(contents)
    raise ValueError(f"{path}: unknown model format {kind!r}")
