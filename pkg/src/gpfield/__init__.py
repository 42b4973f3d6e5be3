"""
gpfield - Gaussian-process Euclidean distance fields.

This package builds continuous, probabilistic distance fields from point
clouds using logarithmic (Log-GPIS) and reverting-kernel transforms, and uses
them for scan registration, path optimisation, pseudo point selection,
incremental submapping and iso-surface extraction.
"""

__version__ = "0.1.0"
__license__ = "MIT"

from gpfield.core.distance_field import (
    Field,
    FieldConfig,
    FieldSample,
    FieldVariant,
    build_field,
    default_field_config,
)
from gpfield.core.kernels import KernelFamily, KernelSpec
from gpfield.core.submap_store import SubmapGrid
from gpfield.utils.pointcloud import PointCloud, load_point_cloud

__all__ = [
    "Field",
    "FieldConfig",
    "FieldSample",
    "FieldVariant",
    "KernelFamily",
    "KernelSpec",
    "PointCloud",
    "SubmapGrid",
    "build_field",
    "default_field_config",
    "load_point_cloud",
]
