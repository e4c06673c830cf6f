"""Kernel primitives: pointwise values, Gram matrices, expansions."""

import dataclasses

import numpy as np
import pytest
from scipy.linalg import solve

from flowcast.kernels import (
    GaussianKernel,
    KernelExpansion,
    expansion_eval,
    gaussian_eval,
    kernel_matrix,
)


def test_gaussian_eval_known_values():
    assert gaussian_eval([1.0, 2.0], [1.0, 2.0], 3.0) == 1.0
    got = gaussian_eval([0.0], [2.0], 0.5)
    assert got == pytest.approx(np.exp(-0.25 * 4.0), rel=1e-15)


def test_gaussian_eval_symmetry(rng):
    x, y = rng.random(4), rng.random(4)
    assert gaussian_eval(x, y, 1.3) == gaussian_eval(y, x, 1.3)


def test_gaussian_eval_rejects_bad_arguments():
    with pytest.raises(ValueError, match="dimensions differ"):
        gaussian_eval([1.0, 2.0], [1.0], 1.0)
    with pytest.raises(ValueError, match="1-d point"):
        gaussian_eval(np.zeros((2, 2)), np.zeros((2, 2)), 1.0)
    for bad in (0.0, -1.0, np.nan, np.inf):
        with pytest.raises(ValueError, match="positive real"):
            gaussian_eval([0.0], [1.0], bad)


def test_kernel_class_matches_pointwise(rng):
    X, Y = rng.random((5, 3)), rng.random((4, 3))
    K = GaussianKernel(0.7)(X, Y)
    assert K.shape == (5, 4)
    for i in range(5):
        for j in range(4):
            assert K[i, j] == pytest.approx(gaussian_eval(X[i], Y[j], 0.7), rel=1e-15)


def test_kernel_diag_and_self_matrix(rng):
    X = rng.random((6, 2))
    kernel = GaussianKernel(1.1)
    assert np.array_equal(kernel.diag(X), np.ones(6))
    K = kernel(X)
    assert np.allclose(K, K.T)
    assert np.allclose(np.diag(K), 1.0)


def test_kernel_dimension_mismatch():
    with pytest.raises(ValueError, match="dimensions differ"):
        GaussianKernel(1.0)(np.zeros((3, 2)), np.zeros((3, 4)))


def test_kernel_matrix_positive_definite(rng):
    X = rng.random((12, 3))
    K = kernel_matrix(X, 1.5)
    assert np.linalg.eigvalsh(K).min() > 0


def test_kernel_matrix_rejects_duplicates():
    X = np.array([[0.0, 1.0], [2.0, 3.0], [0.0, 1.0]])
    with pytest.raises(ValueError, match="pairwise distinct"):
        kernel_matrix(X, 1.0)


def test_expansion_two_center_solve(rng):
    """Coefficients from a direct 2x2 solve reproduce the targets at centers."""
    centers = np.array([[0.0, 0.0], [1.0, 0.5]])
    targets = np.array([[1.0, -2.0], [0.5, 3.0]])
    eps = 0.9
    alpha = solve(kernel_matrix(centers, eps), targets)
    model = KernelExpansion(centers, alpha, eps)
    assert np.allclose(model(centers[0]), targets[0], atol=1e-12)
    assert np.allclose(model(centers[1]), targets[1], atol=1e-12)


def test_expansion_single_vs_batch(rng):
    model = KernelExpansion(rng.random((5, 3)), rng.standard_normal((5, 2)), 1.2)
    pts = rng.random((7, 3))
    batch = model(pts)
    assert batch.shape == (7, 2)
    for i in range(7):
        single = model(pts[i])
        assert single.shape == (2,)
        # BLAS may round matrix-matrix and matrix-vector products differently.
        assert np.allclose(single, batch[i], rtol=1e-13, atol=1e-15)


def test_empty_expansion_evaluates_to_zero():
    model = KernelExpansion.empty(3, 2, 1.0)
    assert model.n_centers == 0
    assert np.array_equal(model(np.ones(3)), np.zeros(2))
    assert np.array_equal(model(np.ones((4, 3))), np.zeros((4, 2)))


def test_expansion_validation(rng):
    centers = rng.random((4, 2))
    coeffs = rng.random((4, 3))
    with pytest.raises(ValueError, match="centers but"):
        KernelExpansion(centers, coeffs[:3], 1.0)
    with pytest.raises(ValueError, match="2-d"):
        KernelExpansion(centers[0], coeffs, 1.0)
    with pytest.raises(ValueError, match="pairwise distinct"):
        KernelExpansion(np.zeros((2, 2)), np.zeros((2, 1)), 1.0)
    with pytest.raises(ValueError, match="positive real"):
        KernelExpansion(centers, coeffs, -1.0)
    model = KernelExpansion(centers, coeffs, 1.0)
    with pytest.raises(ValueError, match="dimension"):
        model(np.ones(5))


def test_expansion_is_immutable(rng):
    model = KernelExpansion(rng.random((3, 2)), rng.random((3, 1)), 1.0)
    with pytest.raises(dataclasses.FrozenInstanceError):
        model.epsilon = 2.0
    with pytest.raises(ValueError):
        model.centers[0, 0] = 99.0


def test_expansion_eval_single_point_only(rng):
    model = KernelExpansion(rng.random((3, 2)), rng.random((3, 1)), 1.0)
    assert expansion_eval(model, model.centers[1]).shape == (1,)
    with pytest.raises(ValueError, match="1-d point"):
        expansion_eval(model, np.ones((2, 2)))
