"""
Unit tests for GP regression.
"""

import numpy as np
import pytest
from scipy.linalg import LinAlgError, cholesky

from gpfield.core import gp_regression
from gpfield.core.gp_regression import (
    deduplicate,
    fit,
    predict_mean,
    predict_mean_and_grad,
    predict_variance,
)
from gpfield.core.kernels import KernelFamily, KernelSpec, kernel_matrix


class TestDeduplicate:
    """Test near-duplicate removal."""

    def test_keeps_first_occurrence(self):
        points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1e-12], [1.0, 0.0]])
        assert deduplicate(points).tolist() == [0, 1]

    def test_distinct_points_untouched(self, rng):
        points = rng.uniform(size=(50, 3))
        assert deduplicate(points).tolist() == list(range(50))


class TestFit:
    """Test GP fitting."""

    def test_single_point(self, se_kernel):
        model = fit(np.array([[0.0, 0.0]]), np.array([1.0]), se_kernel)
        assert model.alpha == pytest.approx([1.0])
        assert model.jitter == 0.0
        assert predict_mean(model, [0.0, 0.0]) == pytest.approx(1.0)

    def test_jitter_escalates_after_failure(self, se_kernel, monkeypatch):
        diagonals = []

        def flaky(matrix, **kwargs):
            diagonals.append(float(matrix[0, 0]))
            if len(diagonals) == 1:
                raise LinAlgError("not positive definite")
            return cholesky(matrix, **kwargs)

        monkeypatch.setattr(gp_regression, "cholesky", flaky)
        model = fit(np.array([[0.0, 0.0]]), np.array([1.0]), se_kernel)
        assert diagonals == [1.0, 1.0 + 1e-8]
        assert model.jitter == 1e-8
        assert model.alpha == pytest.approx([1.0 / (1.0 + 1e-8)], rel=1e-14)

    def test_jitter_exhausted(self, se_kernel, monkeypatch):
        diagonals = []

        def failing(matrix, **kwargs):
            diagonals.append(float(matrix[0, 0]))
            raise LinAlgError("not positive definite")

        monkeypatch.setattr(gp_regression, "cholesky", failing)
        with pytest.raises(RuntimeError, match="gram matrix not positive definite"):
            fit(np.array([[0.0, 0.0]]), np.array([1.0]), se_kernel)
        assert diagonals == [1.0, 1.0 + 1e-8, 1.0 + 1e-6, 1.0 + 1e-4]

    def test_duplicates_removed(self, se_kernel):
        points = np.array([[0.0, 0.0], [0.0, 0.0], [0.5, 0.0]])
        model = fit(points, np.ones(3), se_kernel)
        assert model.size == 2

    def test_reconstructs_targets(self, rng):
        spec = KernelSpec(family=KernelFamily.MATERN32, length_scale=0.3)
        X = rng.uniform(size=(60, 2))
        y = rng.normal(size=60)
        model = fit(X, y, spec)
        K = kernel_matrix(spec, X, X) + model.jitter * np.eye(60)
        assert np.max(np.abs(K @ model.alpha - y)) < 1e-10 * (1.0 + np.max(np.abs(y)))

    def test_interpolates_without_noise(self, rng):
        spec = KernelSpec(family=KernelFamily.MATERN12, length_scale=0.5)
        X = rng.uniform(size=(30, 3))
        y = np.sin(X[:, 0])
        model = fit(X, y, spec)
        assert np.allclose(model.mean(X), y, atol=1e-8)

    def test_errors(self, se_kernel):
        with pytest.raises(ValueError, match="zero points"):
            fit(np.empty((0, 2)), np.empty(0), se_kernel)
        with pytest.raises(ValueError, match="targets"):
            fit(np.array([[0.0, 0.0], [1.0, 0.0]]), np.ones(3), se_kernel)
        with pytest.raises(ValueError, match="non-finite"):
            fit(np.array([[np.inf, 0.0]]), np.ones(1), se_kernel)
        with pytest.raises(ValueError, match="noise"):
            fit(np.array([[0.0, 0.0]]), np.ones(1), se_kernel, noise_variance=-1.0)


class TestPrediction:
    """Test posterior moments."""

    def test_variance_independent_of_targets(self, rng, se_kernel):
        X = rng.uniform(-2, 2, size=(20, 2))
        Q = rng.uniform(-2, 2, size=(10, 2))
        a = fit(X, np.ones(20), se_kernel, noise_variance=1e-3)
        b = fit(X, rng.normal(size=20), se_kernel, noise_variance=1e-3)
        assert np.array_equal(a.variance(Q), b.variance(Q))

    def test_mean_linear_in_targets(self, rng, se_kernel):
        X = rng.uniform(-2, 2, size=(20, 2))
        Q = rng.uniform(-2, 2, size=(10, 2))
        y = rng.normal(size=20)
        once = fit(X, y, se_kernel, noise_variance=1e-3)
        twice = fit(X, 2.0 * y, se_kernel, noise_variance=1e-3)
        assert np.allclose(twice.mean(Q), 2.0 * once.mean(Q), rtol=1e-12, atol=1e-14)

    def test_variance_bounds(self, rng, se_kernel):
        X = rng.uniform(-1, 1, size=(15, 2))
        model = fit(X, np.ones(15), se_kernel, noise_variance=1e-4)
        far = predict_variance(model, [50.0, 50.0])
        assert far == pytest.approx(se_kernel.signal_variance)
        assert 0.0 <= predict_variance(model, X[0]) < 1e-3

    def test_gradient_matches_finite_differences(self, rng):
        spec = KernelSpec(family=KernelFamily.MATERN32, length_scale=0.4)
        X = rng.uniform(size=(25, 3))
        model = fit(X, np.ones(25), spec, noise_variance=1e-4)
        q = np.array([0.5, 0.5, 1.3])
        _, grad = predict_mean_and_grad(model, q)
        h = 1e-6
        numeric = [
            (predict_mean(model, q + h * e) - predict_mean(model, q - h * e)) / (2 * h)
            for e in np.eye(3)
        ]
        assert np.allclose(grad, numeric, rtol=1e-5, atol=1e-9)

    def test_chunking_does_not_change_results(self, rng, se_kernel):
        X = rng.uniform(size=(20, 2))
        Q = rng.uniform(size=(37, 2))
        whole = fit(X, np.ones(20), se_kernel, noise_variance=1e-4)
        chunked = fit(X, np.ones(20), se_kernel, noise_variance=1e-4, chunk_size=5)
        assert np.allclose(whole.mean(Q), chunked.mean(Q), atol=1e-14)
        assert np.allclose(whole.variance(Q), chunked.variance(Q), atol=1e-14)

    def test_query_dimension_mismatch(self, se_kernel):
        model = fit(np.array([[0.0, 0.0]]), np.ones(1), se_kernel)
        with pytest.raises(ValueError, match="dimension"):
            model.mean(np.zeros((1, 3)))
