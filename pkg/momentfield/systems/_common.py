"""
Shared evaluation helpers for the moment systems: currents, activation
derivatives and the transport part A C + C A^T common to every closure.
"""
from typing import NamedTuple

import numpy as np

from momentfield.models import NetworkConfig


class LocalField(NamedTuple):
    """Currents and activation derivatives at one mean-activity vector."""

    s: np.ndarray
    f: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    gain: np.ndarray  # gain[i, k] = f_i'(s_i) w_ik
    linear: np.ndarray  # -diag(alpha) + gain


def local_field(nu: np.ndarray, net: NetworkConfig) -> LocalField:
    s = net.total_current(nu)
    f, f1, f2 = net.activation_derivatives(s, up_to=2)
    gain = f1[:, None] * net.w
    return LocalField(s, f, f1, f2, gain, gain - np.diag(net.alpha))


def transport(linear: np.ndarray, corr: np.ndarray) -> np.ndarray:
    """A C + C A^T, the Lyapunov operator applied to the correlation block."""
    product = linear @ corr
    return product + product.T


def second_order_drive(lf: LocalField, w: np.ndarray, corr: np.ndarray) -> np.ndarray:
    """1/2 f_i'' sum_kl w_ik w_il corr_kl, the correlation correction to the mean."""
    return 0.5 * lf.f2 * np.einsum("ik,kl,il->i", w, corr, w)
