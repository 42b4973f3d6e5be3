"""
Exact Gaussian-process regression.

This module fits a GP to scalar targets with a Cholesky factorization and
evaluates posterior means, mean gradients and variances in vectorised chunks.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.spatial import KDTree
from scipy.spatial.distance import cdist

from gpfield.core.kernels import KernelSpec, kernel_from_distance, kernel_matrix, radial_factor

logger = logging.getLogger(__name__)

DUPLICATE_TOLERANCE = 1e-9

# Multipliers of sigma^2: an unjittered attempt, then three escalating retries
JITTER_LADDER = (0.0, 1e-8, 1e-6, 1e-4)

DEFAULT_CHUNK_SIZE = 4096


def _as_matrix(points: np.ndarray, name: str) -> np.ndarray:
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] == 0:
        raise ValueError(f"{name} must be an (N, D) array, got shape {X.shape}")
    bad = np.flatnonzero(~np.all(np.isfinite(X), axis=1))
    if bad.size:
        raise ValueError(f"{name} row {int(bad[0])} has non-finite coordinates")
    return X


def deduplicate(points: np.ndarray, tolerance: float = DUPLICATE_TOLERANCE) -> np.ndarray:
    """
    Indices of points to keep after removing near-duplicates.

    The first occurrence of each cluster of points closer than the tolerance
    is kept; the returned indices are sorted.
    """
    if len(points) < 2:
        return np.arange(len(points))
    pairs = KDTree(points).query_pairs(r=tolerance, output_type="ndarray")
    keep = np.ones(len(points), dtype=bool)
    if len(pairs):
        keep[pairs.max(axis=1)] = False
    return np.flatnonzero(keep)


@dataclass(frozen=True, eq=False)
class GpModel:
    """
    A fitted Gaussian-process regressor.

    Attributes:
        inputs: Training inputs X (N x D), duplicates removed
        targets: Training targets y (N,)
        kernel: Kernel hyperparameters
        noise_variance: Observation noise variance
        jitter: Diagonal regularisation that made the factorization succeed
        chol_L: Lower Cholesky factor of K + (noise + jitter) I
        alpha: Solution of (K + (noise + jitter) I) alpha = y
        chunk_size: Query rows evaluated per vectorised block
    """

    inputs: np.ndarray
    targets: np.ndarray
    kernel: KernelSpec
    noise_variance: float
    jitter: float
    chol_L: np.ndarray
    alpha: np.ndarray
    chunk_size: int = DEFAULT_CHUNK_SIZE

    @property
    def dim(self) -> int:
        return int(self.inputs.shape[1])

    @property
    def size(self) -> int:
        return int(self.inputs.shape[0])

    def _chunks(self, Q: np.ndarray) -> Iterator[Tuple[slice, np.ndarray]]:
        Q = _as_matrix(Q, "queries")
        if Q.shape[1] != self.dim:
            raise ValueError(f"expected queries of dimension {self.dim}, got {Q.shape[1]}")
        step = max(1, self.chunk_size)
        for start in range(0, len(Q), step):
            sl = slice(start, min(start + step, len(Q)))
            yield sl, Q[sl]

    def mean(self, Q: np.ndarray) -> np.ndarray:
        """Posterior mean at each query row."""
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        out = np.empty(len(Q))
        for sl, chunk in self._chunks(Q):
            out[sl] = kernel_matrix(self.kernel, chunk, self.inputs) @ self.alpha
        return out

    def mean_and_grad(self, Q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Posterior mean and its spatial gradient at each query row."""
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        mean = np.empty(len(Q))
        grad = np.empty((len(Q), self.dim))
        for sl, chunk in self._chunks(Q):
            R = cdist(chunk, self.inputs)
            mean[sl] = kernel_from_distance(self.kernel, R) @ self.alpha
            W = radial_factor(self.kernel, R) * self.alpha[None, :]
            grad[sl] = chunk * W.sum(axis=1)[:, None] - W @ self.inputs
        return mean, grad

    def explained_variance(self, Q: np.ndarray) -> np.ndarray:
        """Variance removed from the prior by the data, k_q^T (K + s I)^-1 k_q."""
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        out = np.empty(len(Q))
        for sl, chunk in self._chunks(Q):
            Kq = kernel_matrix(self.kernel, self.inputs, chunk)
            v = solve_triangular(self.chol_L, Kq, lower=True, check_finite=False)
            out[sl] = np.sum(v * v, axis=0)
        return out

    def variance(self, Q: np.ndarray) -> np.ndarray:
        """Posterior variance clamped to [0, sigma^2]."""
        s2 = self.kernel.signal_variance
        return np.clip(s2 - self.explained_variance(Q), 0.0, s2)


def fit(
    points: np.ndarray,
    targets: np.ndarray,
    kernel: KernelSpec,
    noise_variance: float = 0.0,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> GpModel:
    """
    Fit a GP to the given samples.

    Args:
        points: Training inputs (N x D)
        targets: Training targets (N,)
        kernel: Kernel hyperparameters
        noise_variance: Observation noise variance
        chunk_size: Query rows per vectorised block at prediction time

    Returns:
        GpModel: The fitted model

    Raises:
        ValueError: On empty or mismatched inputs
        RuntimeError: If the Gram matrix cannot be factorized
    """
    X = _as_matrix(points, "points")
    y = np.asarray(targets, dtype=float).reshape(-1)
    if len(X) == 0:
        raise ValueError("cannot fit a GP to zero points")
    if len(y) != len(X):
        raise ValueError(f"got {len(X)} points but {len(y)} targets")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    if noise_variance < 0:
        raise ValueError(f"noise variance must be non-negative, got {noise_variance}")

    keep = deduplicate(X)
    if len(keep) < len(X):
        logger.debug(f"Removed {len(X) - len(keep)} duplicate training points")
    X = X[keep]
    y = y[keep]

    gram = kernel_matrix(kernel, X, X)
    gram[np.diag_indices_from(gram)] += noise_variance

    chol = None
    jitter = 0.0
    for factor in JITTER_LADDER:
        jitter = factor * kernel.signal_variance
        try:
            chol = cholesky(
                gram + jitter * np.eye(len(X)), lower=True, check_finite=False
            )
            break
        except LinAlgError:
            logger.warning(f"Cholesky failed with jitter {jitter:.1e}, escalating")
    if chol is None:
        raise RuntimeError("gram matrix not positive definite")

    alpha = cho_solve((chol, True), y, check_finite=False)
    return GpModel(
        inputs=X,
        targets=y,
        kernel=kernel,
        noise_variance=float(noise_variance),
        jitter=float(jitter),
        chol_L=chol,
        alpha=alpha,
        chunk_size=chunk_size,
    )


def predict_mean(model: GpModel, q: np.ndarray) -> float:
    """Posterior mean at a single point."""
    return float(model.mean(np.asarray(q, dtype=float).reshape(1, -1))[0])


def predict_mean_and_grad(model: GpModel, q: np.ndarray) -> Tuple[float, np.ndarray]:
    """Posterior mean and gradient at a single point."""
    mean, grad = model.mean_and_grad(np.asarray(q, dtype=float).reshape(1, -1))
    return float(mean[0]), grad[0]


def predict_variance(model: GpModel, q: np.ndarray) -> float:
    """Posterior variance at a single point."""
    return float(model.variance(np.asarray(q, dtype=float).reshape(1, -1))[0])
