"""
Vect, Kronecker products and sums, and their spectral identities.
"""
import sys
import os

# Add parent directory to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np
import pytest

from momentfield.exceptions import ConfigurationError
from momentfield.kronecker import (
    kron_product,
    kron_sum,
    kron_sum_apply,
    match_spectra,
    monodromy_square_identity,
    pairwise_products,
    pairwise_sums,
    unvect,
    vect,
    vect_conjugation,
)
from tests.test_utils import random_matrix


def test_vect_stacks_columns():
    X = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert vect(X).tolist() == [1.0, 3.0, 2.0, 4.0]
    assert np.array_equal(unvect(vect(X), 2), X)


def test_mixed_product_rule():
    """(A kron B)(C kron D) = (AC) kron (BD)."""
    rng = np.random.default_rng(3)
    A, B, C, D = (random_matrix(rng, 3) for _ in range(4))
    assert np.allclose(kron_product(A, B) @ kron_product(C, D), kron_product(A @ C, B @ D))


def test_product_and_sum_spectra():
    """eig(A kron B) = {lambda_i mu_j} and eig(A (+) B) = {lambda_i + mu_j} over random matrices."""
    rng = np.random.default_rng(2024)
    for trial in range(200):
        size = 2 + trial % 3
        A, B = random_matrix(rng, size), random_matrix(rng, size)
        lam, mu = np.linalg.eigvals(A), np.linalg.eigvals(B)
        products = (lam[:, None] * mu[None, :]).ravel()
        sums = (lam[:, None] + mu[None, :]).ravel()
        assert match_spectra(products, np.linalg.eigvals(kron_product(A, B)), 1e-6)
        assert match_spectra(sums, np.linalg.eigvals(kron_sum(A, B)), 1e-6)


def test_self_kronecker_sum_spectrum():
    """eig(A (+) A) is the multiset of all pairwise sums."""
    rng = np.random.default_rng(11)
    A = random_matrix(rng, 3)
    lam = np.linalg.eigvals(A)
    assert match_spectra(pairwise_sums(lam), np.linalg.eigvals(kron_sum(A, A)), 1e-6)
    assert match_spectra(pairwise_products(lam), np.linalg.eigvals(kron_product(A, A)), 1e-6)
    assert pairwise_sums(lam, upper_only=True).size == 6


def test_vect_conjugation():
    """Vect(A X B) = (B^T kron A) Vect(X)."""
    rng = np.random.default_rng(5)
    A, X, B = (random_matrix(rng, 4) for _ in range(3))
    assert np.allclose(vect_conjugation(A, X, B), vect(A @ X @ B))


def test_lyapunov_operator():
    """(A (+) A) Vect(X) = Vect(A X + X A^T), with and without the dense matrix."""
    rng = np.random.default_rng(7)
    A, X = random_matrix(rng, 3), random_matrix(rng, 3)
    expected = vect(A @ X + X @ A.T)
    assert np.allclose(kron_sum(A, A) @ vect(X), expected)
    assert np.allclose(kron_sum_apply(A, A, vect(X)), expected)


def test_kron_sum_apply_matches_dense_for_distinct_factors():
    rng = np.random.default_rng(8)
    A, B, X = (random_matrix(rng, 3) for _ in range(3))
    assert np.allclose(kron_sum_apply(A, B, vect(X)), kron_sum(A, B) @ vect(X))


def test_kron_sum_needs_square_matrices():
    with pytest.raises(ConfigurationError):
        kron_sum(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(ConfigurationError):
        kron_sum(np.eye(2), np.eye(3))
    with pytest.raises(ConfigurationError):
        kron_sum(np.eye(9), np.eye(9))


def test_match_spectra_rejects_mismatch():
    assert not match_spectra([1.0, 2.0], [1.0, 2.1], 1e-6)
    assert not match_spectra([1.0, 2.0], [1.0], 1e-6)
    assert match_spectra([1.0, 1.0, 2.0], [2.0, 1.0, 1.0], 1e-12)


def test_resolvent_square_identity_constant():
    """For constant A, Psi(t) = Phi(t) kron Phi(t) = expm(t A (+) A)."""
    A = np.array([[-1.0, 2.0], [-0.5, -0.3]])
    pair = monodromy_square_identity(lambda t, x: A, np.linspace(0.0, 3.0, 7))
    assert np.max(pair.defect()) < 1e-6
    assert np.allclose(pair.phi[0], np.eye(2))


def test_resolvent_square_identity_periodic():
    """The identity holds for a periodic linearization over one period."""

    def linearization(t, x):
        return np.array([[-1.0, np.sin(t)], [0.5 * np.cos(t), -0.5]])

    pair = monodromy_square_identity(linearization, np.linspace(0.0, 2 * np.pi, 9))
    assert np.max(pair.defect()) < 1e-6
    lam = np.linalg.eigvals(pair.phi[-1])
    assert match_spectra(pairwise_products(lam), np.linalg.eigvals(pair.psi[-1]), 1e-6)
