"""
Vect operator, Kronecker products and sums, and the spectral identities used by
the correlation-block stability analysis.

Vect stacks columns: Vect([[x11, x12], [x21, x22]]) = [x11, x21, x12, x22], so
Vect(A X B) = (B^T kron A) Vect(X) and the Lyapunov operator X -> A X + X A^T
becomes the Kronecker sum A (+) A acting on Vect(X).
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from momentfield.exceptions import ConfigurationError, IntegrationError

logger = logging.getLogger(__name__)

MAX_DENSE_POPULATIONS = 8


def vect(X: np.ndarray) -> np.ndarray:
    """Column-stacking of a matrix."""
    return np.asarray(X).reshape(-1, order="F")


def unvect(v: np.ndarray, rows: int, cols: Optional[int] = None) -> np.ndarray:
    """Inverse of ``vect``."""
    cols = rows if cols is None else cols
    return np.asarray(v).reshape((rows, cols), order="F")


def kron_product(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Block matrix [a_ij B]."""
    return np.kron(np.atleast_2d(A), np.atleast_2d(B))


def _check_square(A: np.ndarray, B: np.ndarray) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1] or B.shape != A.shape:
        raise ConfigurationError(
            f"Kronecker sum needs square matrices of equal size, got {A.shape} and {B.shape}"
        )
    if A.shape[0] > MAX_DENSE_POPULATIONS:
        raise ConfigurationError(f"Dense Kronecker algebra is limited to {MAX_DENSE_POPULATIONS} x {MAX_DENSE_POPULATIONS}")


def kron_sum(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """A (+) B = A kron I + I kron B."""
    A, B = np.atleast_2d(A), np.atleast_2d(B)
    _check_square(A, B)
    identity = np.eye(A.shape[0])
    return np.kron(A, identity) + np.kron(identity, B)


def kron_sum_apply(A: np.ndarray, B: np.ndarray, v: np.ndarray) -> np.ndarray:
    """(A (+) B) v without forming the M^2 x M^2 matrix: Vect(B X + X A^T)."""
    A, B = np.atleast_2d(A), np.atleast_2d(B)
    _check_square(A, B)
    X = unvect(v, A.shape[0])
    return vect(B @ X + X @ A.T)


def vect_conjugation(A: np.ndarray, X: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Vect(A X B) evaluated as (B^T kron A) Vect(X)."""
    return kron_product(np.asarray(B).T, A) @ vect(X)


def match_spectra(expected: Sequence[complex], actual: Sequence[complex], tol: float) -> bool:
    """
    Multiset comparison of two spectra by greedy nearest-neighbour matching.

    The tolerance is scaled by max(1, largest modulus) of the expected set.
    """
    expected = list(np.asarray(expected, dtype=complex))
    remaining = list(np.asarray(actual, dtype=complex))
    if len(expected) != len(remaining):
        return False
    scale = max(1.0, max((abs(z) for z in expected), default=0.0))
    for z in sorted(expected, key=lambda c: (c.real, c.imag)):
        distances = [abs(z - r) for r in remaining]
        k = int(np.argmin(distances))
        if distances[k] > tol * scale:
            return False
        remaining.pop(k)
    return True


def pairwise_sums(values: Sequence[complex], upper_only: bool = False) -> np.ndarray:
    """lambda_i + lambda_j over all (i, j), or over i <= j."""
    values = np.asarray(values, dtype=complex)
    sums = values[:, None] + values[None, :]
    if upper_only:
        return sums[np.triu_indices(values.size)]
    return sums.ravel()


def pairwise_products(values: Sequence[complex], upper_only: bool = False) -> np.ndarray:
    """mu_i mu_j over all (i, j), or over i <= j."""
    values = np.asarray(values, dtype=complex)
    products = values[:, None] * values[None, :]
    if upper_only:
        return products[np.triu_indices(values.size)]
    return products.ravel()


@dataclass
class ResolventPair:
    """
    Resolvents of a linear periodic system and of its Kronecker-sum lift.

    Attributes:
        times: Output times
        phi: Phi(t), shape (K, M, M)
        psi: Psi(t) solving Psi' = (A (+) A) Psi, shape (K, M^2, M^2)
    """

    times: np.ndarray
    phi: np.ndarray
    psi: np.ndarray

    def defect(self) -> np.ndarray:
        """max-norm of Psi(t) - Phi(t) kron Phi(t) at every output time."""
        return np.array([np.max(np.abs(p - np.kron(f, f))) for f, p in zip(self.phi, self.psi)])


def monodromy_square_identity(
    linearization: Callable[[float, np.ndarray], np.ndarray],
    times: Sequence[float],
    vector_field: Optional[Callable[[float, np.ndarray], np.ndarray]] = None,
    state0: Optional[np.ndarray] = None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> ResolventPair:
    """
    Integrate Phi' = A Phi and Psi' = (A (+) A) Psi side by side.

    Args:
        linearization: A(t, x); x is the state when ``vector_field`` is given,
            otherwise an empty array
        times: Increasing output times starting at 0
        vector_field: Optional state equation integrated alongside
        state0: Initial state for ``vector_field``
        rtol: Relative tolerance
        atol: Absolute tolerance

    Returns:
        ResolventPair with Phi(0) = I and Psi(0) = I
    """
    times = np.asarray(times, dtype=float)
    x0 = np.zeros(0) if vector_field is None else np.asarray(state0, dtype=float)
    d = x0.size
    M = np.atleast_2d(linearization(0.0, x0)).shape[0]
    M2 = M * M

    def augmented(t, y):
        x = y[:d]
        A = np.atleast_2d(linearization(t, x))
        phi = unvect(y[d:d + M2], M)
        psi = unvect(y[d + M2:], M2)
        dx = vector_field(t, x) if vector_field is not None else np.zeros(0)
        dpsi = np.column_stack([kron_sum_apply(A, A, psi[:, k]) for k in range(M2)])
        return np.concatenate([dx, vect(A @ phi), vect(dpsi)])

    y0 = np.concatenate([x0, vect(np.eye(M)), vect(np.eye(M2))])
    sol = solve_ivp(augmented, (times[0], times[-1]), y0, method="RK45", t_eval=times, rtol=rtol, atol=atol)
    if sol.status < 0:
        raise IntegrationError(f"Resolvent integration failed: {sol.message}", sol.t[-1], sol.y[:, -1])
    phi = np.stack([unvect(col[d:d + M2], M) for col in sol.y.T])
    psi = np.stack([unvect(col[d + M2:], M2) for col in sol.y.T])
    return ResolventPair(sol.t, phi, psi)
