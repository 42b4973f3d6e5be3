"""Utility functions and helper modules."""

from gpfield.utils.logging import setup_logging
from gpfield.utils.pointcloud import PointCloud, load_point_cloud, write_ply, write_xyz

__all__ = [
    "setup_logging",
    "PointCloud",
    "load_point_cloud",
    "write_ply",
    "write_xyz",
]
