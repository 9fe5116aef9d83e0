"""
Wilson-Cowan rate equations: d nu_i / dt = -alpha_i nu_i + f_i(s_i).
"""
from typing import Tuple

import numpy as np

from momentfield.models import NetworkConfig


def derivatives(nu: np.ndarray, corr: np.ndarray, net: NetworkConfig) -> Tuple[np.ndarray, np.ndarray]:
    s = net.total_current(nu)
    return -net.alpha * nu + net.activation(s), np.zeros((0, 0))


def jacobian(nu: np.ndarray, net: NetworkConfig) -> np.ndarray:
    """A(nu) = -diag(alpha) + diag(f'(s)) w."""
    s = net.total_current(nu)
    return net.activation(s, 1)[:, None] * net.w - np.diag(net.alpha)
