"""
Transition intensities of the Markov model.

Population i loses an active neuron at rate q_i = alpha_i n_i and gains one
at the up-rate built from its activation at s_i = sum_j w_ij n_j / N_j + I_i.
The up-rate is f_i itself unless the network selects another UpRateMode.
"""
import logging
from typing import Tuple, Union

import numpy as np

from momentfield.exceptions import ModelError
from momentfield.models import MarkovState, NetworkConfig, UpRateMode

logger = logging.getLogger(__name__)

NEGATIVE_RATE_TOLERANCE = 1e-12


def transition_rates(state: Union[MarkovState, np.ndarray], net: NetworkConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Down and up rates for a state or a (P, M) batch of counts.

    Rates of transitions that would leave [0, N_i] are zero.

    Returns:
        (q, f) with the shape of the counts

    Raises:
        ModelError: If the activation produces a negative up-rate
    """
    counts = state.n if isinstance(state, MarkovState) else np.asarray(state, dtype=np.int64)
    sizes = net.discrete_sizes
    currents = net.total_current(counts / sizes)
    f = net.activation(currents)
    if net.up_rate is UpRateMode.QUIESCENT:
        up = (sizes - counts) * f / sizes
    elif net.up_rate is UpRateMode.POPULATION:
        up = sizes * f
    else:
        up = np.array(f, dtype=float)
    scale = np.maximum(1.0, np.abs(up))
    if np.any(up < -NEGATIVE_RATE_TOLERANCE * scale):
        raise ModelError(f"Negative up-rate {float(np.min(up)):.6g}; the activation must be non-negative")
    up = np.where(counts >= sizes, 0.0, np.maximum(up, 0.0))
    down = np.where(counts > 0, net.alpha * counts, 0.0)
    return down, up


def rate_table(counts: np.ndarray, net: NetworkConfig) -> np.ndarray:
    """Rates of all 2M channels per row, ordered [down_1..down_M, up_1..up_M]."""
    down, up = transition_rates(np.atleast_2d(counts), net)
    return np.concatenate([down, up], axis=1)
