"""
Activation functions and their derivatives up to order four.

Every kind evaluates vectorized over numpy arrays. The shifted kinds carry the
homotopy parameter ``p`` of the family f_p = f - p * inf(f), which moves a
sign-changing sigmoid to a non-negative one at p = 1.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import expit

from momentfield.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

MAX_ORDER = 4

# Five-point stencils (offsets -2..2) for derivatives of tabulated activations
_STENCILS = {
    1: (np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0, 1),
    2: (np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0, 2),
    3: (np.array([-1.0, 2.0, 0.0, -2.0, 1.0]) / 2.0, 3),
    4: (np.array([1.0, -4.0, 6.0, -4.0, 1.0]), 4),
}
# Higher orders lose digits to cancellation; their steps grow by these factors
_STEP_GROWTH = {1: 1.0, 2: 1.0, 3: 30.0, 4: 100.0}


class ActivationKind(str, Enum):
    LOGISTIC = "logistic"
    SHIFTED_TANH = "shifted-tanh"
    SHIFTED_SIGMOID = "shifted-sigmoid"
    CUSTOM_TABLE = "custom-table"


def _logistic_derivatives(x: np.ndarray, order: int) -> np.ndarray:
    s = expit(x)
    if order == 0:
        return s
    d1 = s * (1.0 - s)
    if order == 1:
        return d1
    if order == 2:
        return d1 * (1.0 - 2.0 * s)
    if order == 3:
        return d1 * (1.0 - 6.0 * s + 6.0 * s * s)
    return d1 * (1.0 - 2.0 * s) * (1.0 - 12.0 * s + 12.0 * s * s)


def _tanh_derivatives(x: np.ndarray, order: int) -> np.ndarray:
    t = np.tanh(x)
    if order == 0:
        return t
    s = 1.0 - t * t
    if order == 1:
        return s
    if order == 2:
        return -2.0 * t * s
    if order == 3:
        return -2.0 * s * (1.0 - 3.0 * t * t)
    return 8.0 * t * s * (2.0 - 3.0 * t * t)


@dataclass(frozen=True)
class ActivationFunction:
    """
    A sigmoidal activation f and its derivatives.

    Attributes:
        kind: Functional family
        threshold: Shift I0 of the shifted kinds, chosen so that f(I0) = 0 at p = 0
        p: Homotopy parameter in [0, 1]; f_p = f - p * inf(f)
        table_x: Abscissae of a custom table (strictly increasing)
        table_y: Ordinates of a custom table
    """

    kind: ActivationKind = ActivationKind.LOGISTIC
    threshold: float = 0.0
    p: float = 0.0
    table_x: Tuple[float, ...] = field(default=(), repr=False)
    table_y: Tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", ActivationKind(self.kind))
        object.__setattr__(self, "table_x", tuple(float(v) for v in self.table_x))
        object.__setattr__(self, "table_y", tuple(float(v) for v in self.table_y))
        if self.kind is ActivationKind.CUSTOM_TABLE:
            if len(self.table_x) < 4 or len(self.table_x) != len(self.table_y):
                raise ConfigurationError(
                    "custom-table activation needs at least 4 (x, y) pairs of equal length"
                )
            if np.any(np.diff(self.table_x) <= 0):
                raise ConfigurationError("custom-table abscissae must be strictly increasing")

    @cached_property
    def _spline(self) -> CubicSpline:
        return CubicSpline(np.asarray(self.table_x), np.asarray(self.table_y))

    @property
    def infimum(self) -> float:
        """Infimum of the un-homotoped function over the real line."""
        if self.kind is ActivationKind.LOGISTIC:
            return 0.0
        if self.kind is ActivationKind.SHIFTED_TANH:
            return -1.0 - float(np.tanh(self.threshold))
        if self.kind is ActivationKind.SHIFTED_SIGMOID:
            return -float(expit(self.threshold))
        return min(self.table_y)

    def __call__(self, x):
        return self.derivative(x, 0)

    def derivative(self, x, order: int = 1):
        """
        Evaluate the derivative of the given order (0 means f itself).

        Args:
            x: Scalar or array of arguments
            order: Derivative order, 0 to 4

        Returns:
            Array (or scalar) of the same shape as x
        """
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"Derivative order must be in [0, {MAX_ORDER}], got {order}")
        x = np.asarray(x, dtype=float)
        if self.kind is ActivationKind.LOGISTIC:
            value = _logistic_derivatives(x, order)
        elif self.kind is ActivationKind.SHIFTED_TANH:
            value = _tanh_derivatives(x, order)
            if order == 0:
                value = value - np.tanh(self.threshold)
        elif self.kind is ActivationKind.SHIFTED_SIGMOID:
            value = _logistic_derivatives(x, order)
            if order == 0:
                value = value - expit(self.threshold)
        else:
            value = self._table_derivative(x, order)

        if order == 0 and self.p != 0.0:
            value = value - self.p * self.infimum
        return value

    def derivatives(self, x, up_to: int = 2) -> Tuple[np.ndarray, ...]:
        """Return (f, f', ..., f^(up_to)) evaluated at x."""
        return tuple(self.derivative(x, k) for k in range(up_to + 1))

    def _table_derivative(self, x: np.ndarray, order: int) -> np.ndarray:
        if order == 0:
            return self._spline(x)
        weights, power = _STENCILS[order]
        h = np.maximum(1e-4, 1e-4 * np.abs(x)) * _STEP_GROWTH[order]
        total = np.zeros_like(x)
        for offset, weight in zip(range(-2, 3), weights):
            if weight != 0.0:
                total = total + weight * self._spline(x + offset * h)
        return total / h**power

    def with_p(self, p: float) -> "ActivationFunction":
        """Return a copy with a new homotopy parameter."""
        return ActivationFunction(self.kind, self.threshold, float(p), self.table_x, self.table_y)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the ``{kind, params}`` form used in network files."""
        params: Dict[str, Any] = {}
        if self.kind in (ActivationKind.SHIFTED_TANH, ActivationKind.SHIFTED_SIGMOID):
            params["threshold"] = self.threshold
        if self.p:
            params["p"] = self.p
        if self.kind is ActivationKind.CUSTOM_TABLE:
            params["x"] = list(self.table_x)
            params["y"] = list(self.table_y)
        return {"kind": self.kind.value, "params": params}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ActivationFunction":
        """Create an activation from ``{kind, params}``."""
        if isinstance(data, str):
            data = {"kind": data}
        try:
            kind = ActivationKind(data.get("kind", ActivationKind.LOGISTIC.value))
        except ValueError as e:
            raise ConfigurationError(f"Unknown activation kind: {data.get('kind')!r}") from e
        params = data.get("params", {}) or {}
        return cls(
            kind=kind,
            threshold=float(params.get("threshold", params.get("I0", 0.0))),
            p=float(params.get("p", 0.0)),
            table_x=tuple(params.get("x", ())),
            table_y=tuple(params.get("y", ())),
        )

    def __repr__(self) -> str:
        if self.kind is ActivationKind.LOGISTIC:
            return "ActivationFunction(logistic)"
        return f"ActivationFunction({self.kind.value}, threshold={self.threshold}, p={self.p})"
