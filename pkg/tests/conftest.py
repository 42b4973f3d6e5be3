"""Pytest configuration and shared fixtures."""

import numpy as np
import pytest

from gpfield.core.benchmark import oracle_distances
from gpfield.core.distance_field import build_field, default_field_config
from gpfield.core.kernels import KernelFamily, KernelSpec
from gpfield.utils.scenes import l_shape, unit_circle


@pytest.fixture
def rng():
    """Seeded generator for randomised tests."""
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def circle_points():
    """256 samples of the unit circle."""
    return unit_circle(256)


@pytest.fixture(scope="session")
def circle_field(circle_points):
    """Reverting field on the unit circle with default hyperparameters."""
    return build_field(circle_points)


@pytest.fixture(scope="session")
def lshape_points():
    """Two 1.5 m walls of 150 points each meeting at the origin."""
    return l_shape(150, 1.5)


@pytest.fixture(scope="session")
def lshape_field(lshape_points):
    """Reverting SE field on the L-shaped scene with l = 0.1."""
    config = default_field_config(lshape_points, length_scale=0.1)
    return build_field(lshape_points, config)


@pytest.fixture
def se_kernel():
    return KernelSpec(family=KernelFamily.SQUARED_EXPONENTIAL, length_scale=1.0)


@pytest.fixture(scope="session")
def circle_annulus(circle_points):
    """Grid nodes (0.02 m spacing) with oracle distance in [0.05, 0.5], and those distances."""
    axis = np.arange(-1.6, 1.6 + 1e-9, 0.02)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    Q = np.column_stack([xx.ravel(), yy.ravel()])
    oracle = oracle_distances(circle_points, Q)
    band = (oracle >= 0.05) & (oracle <= 0.5)
    return Q[band], oracle[band]
