"""Point cloud container and XYZ / text-PLY readers and writers."""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class CloudFormat(str, Enum):
    """On-disk point cloud formats."""

    XYZ = "xyz"
    PLY = "ply"


@dataclass
class PointCloud:
    """
    A set of surface samples.

    Attributes:
        points: N x dim array of coordinates in meters, dim in {2, 3}
        source: Optional identifier of where the points came from
    """

    points: np.ndarray
    source: Optional[str] = None

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, pts.shape[-1] if pts.ndim == 2 else 3)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise ValueError(f"points must be N x 2 or N x 3, got shape {pts.shape}")
        bad = np.flatnonzero(~np.all(np.isfinite(pts), axis=1))
        if bad.size:
            raise ValueError(f"point {int(bad[0])} has non-finite coordinates")
        self.points = pts

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    def __len__(self) -> int:
        return int(self.points.shape[0])


def _format_for(path: Path, fmt: Optional[CloudFormat]) -> CloudFormat:
    if fmt is not None:
        return CloudFormat(fmt)
    if path.suffix.lower() == ".ply":
        return CloudFormat.PLY
    return CloudFormat.XYZ


def _parse_xyz(lines: List[str], source: str) -> PointCloud:
    rows: List[List[float]] = []
    dim: Optional[int] = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) not in (2, 3):
            raise ValueError(f"{source}:{lineno}: expected 2 or 3 coordinates, got {len(tokens)}")
        if dim is None:
            dim = len(tokens)
        elif len(tokens) != dim:
            raise ValueError(f"{source}:{lineno}: expected {dim} coordinates, got {len(tokens)}")
        try:
            row = [float(t) for t in tokens]
        except ValueError:
            raise ValueError(f"{source}:{lineno}: malformed coordinate in {line!r}")
        if not all(np.isfinite(row)):
            raise ValueError(f"{source}:{lineno}: non-finite coordinate")
        rows.append(row)
    if not rows:
        return PointCloud(np.empty((0, dim or 3)), source=source)
    return PointCloud(np.array(rows, dtype=float), source=source)


def _parse_ply(lines: List[str], source: str) -> PointCloud:
    if not lines or lines[0].strip() != "ply":
        raise ValueError(f"{source}:1: missing 'ply' magic")

    # element name -> (count, property names); order matters for the body
    elements: List[tuple] = []
    body_start = None
    for lineno, raw in enumerate(lines[1:], start=2):
        tokens = raw.split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] != "ascii":
                raise ValueError("unsupported encoding")
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise ValueError(f"{source}:{lineno}: malformed element line")
            elements.append((tokens[1], int(tokens[2]), []))
        elif tokens[0] == "property":
            if not elements:
                raise ValueError(f"{source}:{lineno}: property before element")
            elements[-1][2].append(tokens[-1])
        elif tokens[0] == "end_header":
            body_start = lineno
            break
        else:
            raise ValueError(f"{source}:{lineno}: unexpected header line {raw.strip()!r}")
    if body_start is None:
        raise ValueError(f"{source}: missing end_header")

    cursor = body_start
    for name, count, props in elements:
        if name != "vertex":
            cursor += count
            continue
        if "x" not in props or "y" not in props:
            raise ValueError(f"{source}: vertex element lacks x/y properties")
        cols = [props.index("x"), props.index("y")]
        if "z" in props:
            cols.append(props.index("z"))
        rows = []
        for offset in range(count):
            lineno = cursor + offset + 1
            if lineno > len(lines):
                raise ValueError(f"{source}:{lineno}: unexpected end of file")
            tokens = lines[lineno - 1].split()
            try:
                rows.append([float(tokens[c]) for c in cols])
            except (ValueError, IndexError):
                raise ValueError(f"{source}:{lineno}: malformed vertex line")
        pts = np.array(rows, dtype=float).reshape(count, len(cols))
        return PointCloud(pts, source=source)
    raise ValueError(f"{source}: no vertex element")


def load_point_cloud(path: PathLike, fmt: Optional[CloudFormat] = None) -> PointCloud:
    """
    Read a point cloud from disk.

    Args:
        path: File to read
        fmt: Format override; inferred from the suffix when omitted

    Returns:
        PointCloud: The parsed cloud

    Raises:
        ValueError: On malformed content (message carries the line number) or
            binary PLY encodings
        FileNotFoundError: If the file does not exist
    """
    path = Path(path)
    fmt = _format_for(path, fmt)
    if fmt == CloudFormat.PLY:
        with open(path, "rb") as fh:
            head = fh.read(512)
        if b"format binary" in head:
            raise ValueError("unsupported encoding")
    lines = path.read_text(encoding="utf-8").splitlines()
    cloud = _parse_ply(lines, str(path)) if fmt == CloudFormat.PLY else _parse_xyz(lines, str(path))
    logger.debug(f"Loaded {len(cloud)} points ({cloud.dim}D) from {path}")
    return cloud


def format_float(value: float) -> str:
    """Shortest representation that parses back to the same double."""
    return repr(float(value))


def write_xyz(path: PathLike, points: np.ndarray) -> None:
    """Write points as whitespace-separated coordinates, one point per line."""
    pts = np.asarray(getattr(points, "points", points), dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        for row in pts:
            fh.write(" ".join(format_float(v) for v in row) + "\n")


def write_ply(path: PathLike, points: np.ndarray) -> None:
    """Write points as a vertex-only ASCII PLY file."""
    pts = np.asarray(getattr(points, "points", points), dtype=float)
    axes = "xyz"[: pts.shape[1]]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(pts)}\n")
        for axis in axes:
            fh.write(f"property double {axis}\n")
        fh.write("end_header\n")
        for row in pts:
            fh.write(" ".join(format_float(v) for v in row) + "\n")
