"""
Moment system of the Langevin approximation

    dX_i = (-alpha_i X_i + f_i(s_i(X))) dt + eps_i sqrt(alpha_i X_i + f_i(s_i(X))) dW_i,

with eps_i = n_i ** noise_exponent. Expanding the drift and the squared diffusion
to second order around the mean m gives the BCC-like transport plus the diagonal
source eps_i^2 [alpha_i m_i + f_i(s_i) + 1/2 f_i''(s_i) (w C w^T)_ii].

The last term comes from the expectation of the squared diffusion. With
s_i(X) = s_i(m) + sum_k w_ik (X_k - m_k) and C the covariance of X,

    E[f_i(s_i(X))] = f_i(s_i) + 1/2 f_i''(s_i) sum_kl w_ik w_il C_kl + O(|X - m|^3),

since the first-order term has zero mean. The factor 1/2 is the Taylor
coefficient; the noise intensity eps_i^2 already carries the 1/N_i scaling, so
no further size factor multiplies the correlation term. The same correction
enters the mean equation through second_order_drive.
"""
import math
from typing import Tuple

import numpy as np

from momentfield.models import NetworkConfig
from momentfield.systems._common import local_field, second_order_drive, transport


def noise_amplitude(net: NetworkConfig) -> np.ndarray:
    """eps_i = n_i ** noise_exponent; an infinite exponent switches noise off."""
    if math.isinf(net.noise_exponent):
        return np.zeros(net.M)
    return np.power(net.inverse_sizes, net.noise_exponent)


def derivatives(nu: np.ndarray, corr: np.ndarray, net: NetworkConfig) -> Tuple[np.ndarray, np.ndarray]:
    lf = local_field(nu, net)
    drive = second_order_drive(lf, net.w, corr)
    dnu = -net.alpha * nu + lf.f + drive
    diffusion = noise_amplitude(net) ** 2 * (net.alpha * nu + lf.f + drive)
    return dnu, transport(lf.linear, corr) + np.diag(diffusion)
