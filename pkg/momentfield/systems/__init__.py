"""
Deterministic vector fields, one module per system.

``rhs`` evaluates a MomentState; ``flat_field`` returns the ``f(t, y)`` callable
on packed flat states that the integrators and solvers work with.
"""
from typing import Callable, Dict

import numpy as np

from momentfield.exceptions import EvaluationError
from momentfield.numerics import fd_jacobian
from momentfield.models import (
    ModelVariant,
    MomentState,
    NetworkConfig,
    pack_symmetric,
    packed_size,
    unpack_symmetric,
)
from momentfield.systems import bcc, bressloff, infinite, rodriguez_tuckwell, wilson_cowan

SYSTEMS: Dict[ModelVariant, Callable] = {
    ModelVariant.WILSON_COWAN: wilson_cowan.derivatives,
    ModelVariant.INFINITE_SIZE: infinite.derivatives,
    ModelVariant.BCC: bcc.derivatives,
    ModelVariant.BRESSLOFF_RESCALED: bressloff.derivatives,
    ModelVariant.RODRIGUEZ_TUCKWELL: rodriguez_tuckwell.derivatives,
}


def state_dimension(variant: ModelVariant, M: int) -> int:
    variant = ModelVariant.parse(variant)
    return M + (packed_size(M) if variant.has_correlations else 0)


def rhs(variant: ModelVariant, state: MomentState, net: NetworkConfig) -> MomentState:
    """
    Evaluate the vector field of a system.

    Args:
        variant: Which system
        state: Current state; its correlation block must fit the variant
        net: Network parameters

    Returns:
        The time derivative, packed like the state

    Raises:
        EvaluationError: If the state is non-finite or does not fit the variant
    """
    variant = ModelVariant.parse(variant)
    return MomentState.from_flat(flat_field(variant, net)(0.0, state.flat), net.M)


def wc_jacobian(nu: np.ndarray, net: NetworkConfig) -> np.ndarray:
    """Analytic Wilson-Cowan Jacobian A(nu) = -diag(alpha) + diag(f'(s)) w."""
    return wilson_cowan.jacobian(np.asarray(nu, dtype=float), net)


def flat_field(variant: ModelVariant, net: NetworkConfig) -> Callable[[float, np.ndarray], np.ndarray]:
    """Return ``f(t, y)`` acting on flat packed states of the given system."""
    variant = ModelVariant.parse(variant)
    derivatives = SYSTEMS[variant]
    M = net.M
    expected = state_dimension(variant, M)
    with_corr = variant.has_correlations

    def field(t: float, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (expected,):
            raise EvaluationError(f"{variant.value} state must have {expected} entries, got {y.shape}")
        if not np.all(np.isfinite(y)):
            raise EvaluationError(f"Non-finite state passed to the {variant.value} system")
        nu = y[:M]
        corr = unpack_symmetric(y[M:], M) if with_corr else np.zeros((M, M))
        dnu, dcorr = derivatives(nu, corr, net)
        if not with_corr:
            return dnu
        return np.concatenate([dnu, pack_symmetric(dcorr)])

    return field


def flat_jacobian(
    variant: ModelVariant, net: NetworkConfig, analytic: bool = True
) -> Callable[[np.ndarray], np.ndarray]:
    """
    Return ``J(y)`` for a system.

    The Wilson-Cowan Jacobian is analytic unless ``analytic=False``; the moment
    systems use central finite differences of the flat field.
    """
    variant = ModelVariant.parse(variant)
    if analytic and variant is ModelVariant.WILSON_COWAN:
        return lambda y: wilson_cowan.jacobian(np.asarray(y, dtype=float), net)
    field = flat_field(variant, net)
    return lambda y: fd_jacobian(lambda z: field(0.0, z), y)


__all__ = ["SYSTEMS", "flat_field", "flat_jacobian", "rhs", "state_dimension", "wc_jacobian"]
