"""
Infinite-size moment system, the common N -> infinity limit of the BCC and
rescaled Bressloff closures. It never reads the population sizes.

    d nu_i / dt  = -alpha_i nu_i + f_i(s_i) + 1/2 f_i''(s_i) sum_kl w_ik w_il D_kl
    d D_ij / dt  = -(alpha_i + alpha_j) D_ij + sum_k [f_i' w_ik D_kj + f_j' w_jk D_ki]
"""
from typing import Tuple

import numpy as np

from momentfield.models import NetworkConfig
from momentfield.systems._common import local_field, second_order_drive, transport


def derivatives(nu: np.ndarray, corr: np.ndarray, net: NetworkConfig) -> Tuple[np.ndarray, np.ndarray]:
    lf = local_field(nu, net)
    dnu = -net.alpha * nu + lf.f + second_order_drive(lf, net.w, corr)
    return dnu, transport(lf.linear, corr)
