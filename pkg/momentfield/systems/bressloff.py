"""
Rescaled Bressloff closure. The correlation C_ij receives the diagonal Poisson
source (1/N_i)[alpha_i nu_i + f_i(s_i)] delta_ij.
"""
from typing import Tuple

import numpy as np

from momentfield.models import NetworkConfig
from momentfield.systems._common import local_field, second_order_drive, transport


def derivatives(nu: np.ndarray, corr: np.ndarray, net: NetworkConfig) -> Tuple[np.ndarray, np.ndarray]:
    lf = local_field(nu, net)
    dnu = -net.alpha * nu + lf.f + second_order_drive(lf, net.w, corr)
    poisson = net.inverse_sizes * (net.alpha * nu + lf.f)
    return dnu, transport(lf.linear, corr) + np.diag(poisson)
