"""Gaussian kernel primitives: pointwise evaluation, Gram matrices, and
vector-valued kernel expansions.

Everything here is a pure function of immutable inputs and safe to call
concurrently. All arithmetic is double precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "Kernel",
    "GaussianKernel",
    "KernelExpansion",
    "gaussian_eval",
    "kernel_matrix",
    "expansion_eval",
]


def _check_epsilon(epsilon) -> float:
    eps = float(epsilon)
    if not np.isfinite(eps) or eps <= 0.0:
        raise ValueError(f"shape parameter must be a positive real, got {epsilon!r}")
    return eps


def _as_point(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-d point, got array of shape {x.shape}")
    return x


def _as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-d array of points, got shape {X.shape}")
    return X


class Kernel:
    """Symmetric, strictly positive definite bivariate function.

    Subclasses implement ``__call__`` for pairwise cross matrices and
    ``diag`` for the diagonal K(x, x). The Gaussian below is the only
    instance shipped; the greedy trainer works with any subclass.
    """

    def __call__(self, X, Y=None) -> np.ndarray:
        raise NotImplementedError

    def diag(self, X) -> np.ndarray:
        raise NotImplementedError


class GaussianKernel(Kernel):
    """Gaussian kernel exp(-epsilon^2 ||x - y||_2^2).

    Parameters
    ----------
    epsilon
        Positive shape parameter (inverse length scale of the inputs).
    """

    def __init__(self, epsilon: float):
        self.epsilon = _check_epsilon(epsilon)

    def __call__(self, X, Y=None) -> np.ndarray:
        """Pairwise kernel matrix between the rows of `X` and `Y` (`X` if None)."""
        X = _as_points(X)
        Y = X if Y is None else _as_points(Y)
        if X.shape[1] != Y.shape[1]:
            raise ValueError(
                f"point dimensions differ: {X.shape[1]} vs {Y.shape[1]}"
            )
        sqdist = cdist(X, Y, "sqeuclidean")
        return np.exp(-(self.epsilon**2) * sqdist)

    def diag(self, X) -> np.ndarray:
        return np.ones(_as_points(X).shape[0])

    def __repr__(self):
        return f"GaussianKernel(epsilon={self.epsilon!r})"


def gaussian_eval(x, y, epsilon) -> float:
    """Evaluate exp(-epsilon^2 ||x - y||_2^2) for two points of equal length."""
    x = _as_point(x)
    y = _as_point(y)
    if x.shape != y.shape:
        raise ValueError(f"point dimensions differ: {x.shape[0]} vs {y.shape[0]}")
    eps = _check_epsilon(epsilon)
    d2 = float(np.sum((x - y) ** 2))
    return float(np.exp(-eps * eps * d2))


def kernel_matrix(X, epsilon) -> np.ndarray:
    """Gaussian Gram matrix of a set of pairwise distinct points.

    The result is symmetric with unit diagonal and, for distinct points,
    positive definite. Coordinate-wise duplicate rows are rejected because
    they would make the matrix singular.
    """
    X = _as_points(X)
    eps = _check_epsilon(epsilon)
    if np.unique(X, axis=0).shape[0] != X.shape[0]:
        raise ValueError("points must be pairwise distinct (duplicate rows found)")
    return np.exp(-eps * eps * cdist(X, X, "sqeuclidean"))


@dataclass(frozen=True)
class KernelExpansion:
    """Sparse vector-valued Gaussian expansion sum_j coeff_j K(x, center_j).

    ``centers`` has shape (n, p) with pairwise distinct rows, ``coefficients``
    shape (n, q) with one coefficient vector per center. An empty expansion
    (n = 0) evaluates to the zero vector; build one with :meth:`empty`.
    """

    centers: np.ndarray
    coefficients: np.ndarray
    epsilon: float

    def __post_init__(self):
        centers = np.array(self.centers, dtype=float, copy=True)
        coefficients = np.array(self.coefficients, dtype=float, copy=True)
        if centers.ndim != 2:
            raise ValueError(f"centers must be 2-d, got shape {centers.shape}")
        if coefficients.ndim != 2:
            raise ValueError(
                f"coefficients must be 2-d, got shape {coefficients.shape}"
            )
        if centers.shape[0] != coefficients.shape[0]:
            raise ValueError(
                f"{centers.shape[0]} centers but {coefficients.shape[0]} coefficients"
            )
        if np.unique(centers, axis=0).shape[0] != centers.shape[0]:
            raise ValueError("centers must be pairwise distinct")
        eps = _check_epsilon(self.epsilon)
        centers.flags.writeable = False
        coefficients.flags.writeable = False
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "epsilon", eps)

    @classmethod
    def empty(cls, input_dim: int, output_dim: int, epsilon: float) -> "KernelExpansion":
        return cls(
            np.zeros((0, input_dim)), np.zeros((0, output_dim)), epsilon
        )

    @property
    def n_centers(self) -> int:
        return self.centers.shape[0]

    @property
    def input_dim(self) -> int:
        return self.centers.shape[1]

    @property
    def output_dim(self) -> int:
        return self.coefficients.shape[1]

    def evaluate(self, x) -> np.ndarray:
        """Evaluate at one point (shape (p,) -> (q,)) or a batch ((M, p) -> (M, q))."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.ndim != 2 or pts.shape[1] != self.input_dim:
            raise ValueError(
                f"expected points of dimension {self.input_dim}, got shape {x.shape}"
            )
        if self.n_centers == 0:
            out = np.zeros((pts.shape[0], self.output_dim))
        else:
            k = np.exp(
                -(self.epsilon**2) * cdist(pts, self.centers, "sqeuclidean")
            )
            out = k @ self.coefficients
        return out[0] if single else out

    __call__ = evaluate


def expansion_eval(model: KernelExpansion, x) -> np.ndarray:
    """Evaluate a kernel expansion at a single point."""
    return model.evaluate(_as_point(x))
