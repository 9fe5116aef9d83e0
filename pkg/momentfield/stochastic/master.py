"""
Exact integration of the master equation for small networks.

The state space is the box prod_i {0..N_i}, enumerated in C order. The
generator A has A[n', n] = rate(n -> n') off the diagonal and minus the
total exit rate on it, so probability vectors evolve as dP/dt = A P and
every column of A sums to zero. The rates are the ones the Gillespie
driver uses, which makes this the reference for it.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.linalg import expm_multiply

from momentfield.exceptions import ConfigurationError, StateSpaceTooLargeError
from momentfield.models import MarkovState, NetworkConfig
from momentfield.stochastic.rates import transition_rates

logger = logging.getLogger(__name__)

MAX_STATES = 100_000


def state_space(net: NetworkConfig) -> Tuple[Tuple[int, ...], np.ndarray]:
    """
    Shape of the state box and all states as a (S, M) array of counts.

    Raises:
        StateSpaceTooLargeError: If the box holds more than MAX_STATES states
    """
    shape = tuple(int(N) + 1 for N in net.discrete_sizes)
    size = int(np.prod(shape, dtype=np.int64))
    if size > MAX_STATES:
        raise StateSpaceTooLargeError(size, MAX_STATES)
    states = np.indices(shape).reshape(len(shape), -1).T.astype(np.int64)
    return shape, states


def generator_matrix(net: NetworkConfig) -> csr_matrix:
    """Sparse generator A of the master equation (columns sum to zero)."""
    shape, states = state_space(net)
    S, M = states.shape
    down, up = transition_rates(states, net)
    source = np.arange(S)
    rows, cols, values = [], [], []
    for i in range(M):
        for rates, step in ((down[:, i], -1), (up[:, i], 1)):
            fires = rates > 0
            target_counts = states[fires].copy()
            target_counts[:, i] += step
            rows.append(np.ravel_multi_index(tuple(target_counts.T), shape))
            cols.append(source[fires])
            values.append(rates[fires])
    exit_rate = down.sum(axis=1) + up.sum(axis=1)
    rows.append(source)
    cols.append(source)
    values.append(-exit_rate)
    return coo_matrix(
        (np.concatenate(values), (np.concatenate(rows), np.concatenate(cols))), shape=(S, S)
    ).tocsr()


@dataclass
class MasterSolution:
    """
    Probability distributions over the state box at output times.

    Attributes:
        times: Output times
        shape: Shape of the state box (N_1 + 1, ..., N_M + 1)
        states: All states as counts, shape (S, M)
        probabilities: Distributions, shape (K, S)
        sizes: Population sizes
    """

    times: np.ndarray
    shape: Tuple[int, ...]
    states: np.ndarray
    probabilities: np.ndarray
    sizes: np.ndarray

    @property
    def mass(self) -> np.ndarray:
        return self.probabilities.sum(axis=1)

    @property
    def mean(self) -> np.ndarray:
        """<n_i> / N_i per time, shape (K, M)."""
        return self.probabilities @ (self.states / self.sizes)

    @property
    def second(self) -> np.ndarray:
        """<n_i n_j> / (N_i N_j) per time, shape (K, M, M)."""
        p = self.states / self.sizes
        return np.einsum("ks,si,sj->kij", self.probabilities, p, p)

    def distribution(self, k: int) -> np.ndarray:
        """Distribution at output k reshaped to the state box."""
        return self.probabilities[k].reshape(self.shape)


def initial_distribution(p0: Union[MarkovState, np.ndarray], shape: Tuple[int, ...]) -> np.ndarray:
    """Flat probability vector from a state (point mass) or an array."""
    S = int(np.prod(shape))
    if isinstance(p0, MarkovState):
        if np.any(p0.n < 0) or np.any(p0.n >= np.array(shape)):
            raise ConfigurationError(f"Initial state {p0.n.tolist()} lies outside the state box {shape}")
        vector = np.zeros(S)
        vector[np.ravel_multi_index(tuple(p0.n), shape)] = 1.0
        return vector
    vector = np.asarray(p0, dtype=float).reshape(-1)
    if vector.size != S:
        raise ConfigurationError(f"Initial distribution has {vector.size} entries, the state box has {S}")
    if np.any(vector < 0) or abs(vector.sum() - 1.0) > 1e-12:
        raise ConfigurationError("Initial distribution must be non-negative and sum to 1")
    return vector


def master_evolve(
    net: NetworkConfig,
    p0: Union[MarkovState, np.ndarray],
    t_end: float,
    n_points: int = 101,
    generator: Optional[csr_matrix] = None,
) -> MasterSolution:
    """
    Integrate dP/dt = A P with the action of the matrix exponential.

    Args:
        net: Network with small finite sizes
        p0: Initial state (point mass) or distribution over the state box
        t_end: Final time
        n_points: Uniform output times on [0, t_end]
        generator: Precomputed generator matrix

    Returns:
        MasterSolution

    Raises:
        StateSpaceTooLargeError: If the state box holds more than 10^5 states
    """
    if not t_end > 0:
        raise ConfigurationError(f"t_end must be positive, got {t_end}")
    shape, states = state_space(net)
    A = generator if generator is not None else generator_matrix(net)
    vector = initial_distribution(p0, shape)
    times = np.linspace(0.0, t_end, n_points)
    logger.debug(f"Master equation over {states.shape[0]} states to t={t_end}")
    if A.count_nonzero() == 0:
        probabilities = np.tile(vector, (n_points, 1))
    else:
        probabilities = expm_multiply(A, vector, start=0.0, stop=t_end, num=n_points, endpoint=True)
    return MasterSolution(times, shape, states, np.asarray(probabilities), net.discrete_sizes.astype(float))
