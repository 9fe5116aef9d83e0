"""
BCC closure in the normal-ordered cumulant c_ij = C_ij - nu_i / N_i delta_ij.

The cumulant equation carries the cross source
(1/N_j) f_i' w_ij nu_j + (1/N_i) f_j' w_ji nu_i on top of the transport term.
"""
from typing import Tuple

import numpy as np

from momentfield.models import NetworkConfig
from momentfield.systems._common import local_field, second_order_drive, transport


def derivatives(nu: np.ndarray, corr: np.ndarray, net: NetworkConfig) -> Tuple[np.ndarray, np.ndarray]:
    lf = local_field(nu, net)
    dnu = -net.alpha * nu + lf.f + second_order_drive(lf, net.w, corr)
    # source[i, j] = f_i' w_ij nu_j / N_j
    source = lf.gain * (net.inverse_sizes * nu)[None, :]
    return dnu, transport(lf.linear, corr) + source + source.T
