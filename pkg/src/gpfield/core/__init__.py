"""Core distance field components."""

from gpfield.core.distance_field import Field, FieldConfig, build_field
from gpfield.core.gp_regression import GpModel, fit
from gpfield.core.kernels import KernelSpec
from gpfield.core.odometry import Pose, register_scan
from gpfield.core.planner import PlanConfig, plan_path
from gpfield.core.submap_store import SubmapGrid

__all__ = [
    "Field",
    "FieldConfig",
    "GpModel",
    "KernelSpec",
    "PlanConfig",
    "Pose",
    "SubmapGrid",
    "build_field",
    "fit",
    "plan_path",
    "register_scan",
]
