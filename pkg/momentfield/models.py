"""
Core data models for the momentfield package.
"""
import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from momentfield.activation import ActivationFunction
from momentfield.exceptions import ConfigurationError, EvaluationError


class ModelVariant(str, Enum):
    """The five deterministic systems."""

    WILSON_COWAN = "wc"
    INFINITE_SIZE = "infinite"
    BCC = "bcc"
    BRESSLOFF_RESCALED = "bressloff"
    RODRIGUEZ_TUCKWELL = "rt"

    @property
    def has_correlations(self) -> bool:
        return self is not ModelVariant.WILSON_COWAN

    @classmethod
    def parse(cls, value: Union[str, "ModelVariant"]) -> "ModelVariant":
        """Accept the short value or the enum name in any case."""
        if isinstance(value, ModelVariant):
            return value
        text = str(value).strip().lower().replace("-", "_")
        for variant in cls:
            if text in (variant.value, variant.name.lower()):
                return variant
        raise ConfigurationError(f"Unknown model variant: {value!r}")


class UpRateMode(str, Enum):
    """
    How the Markov up-rate of a population is built from its activation.

    LITERAL: f_i(s_i(n/N)) with no size factor (default).
    QUIESCENT: (N_i - n_i) f_i(s_i(n/N)) / N_i, the aggregate of quiescent neurons
        each activating at rate f_i / N_i.
    POPULATION: N_i f_i(s_i(n/N)). Opt-in only; its mean-field limit is the
        Wilson-Cowan system, so runs compared against the moment systems use it.
    """

    LITERAL = "literal"
    QUIESCENT = "quiescent"
    POPULATION = "population"


def packed_size(M: int) -> int:
    return M * (M + 1) // 2


def pack_symmetric(matrix: np.ndarray) -> np.ndarray:
    """Upper triangle of a symmetric matrix, row-major."""
    rows, cols = np.triu_indices(matrix.shape[0])
    return np.asarray(matrix)[rows, cols].copy()


def unpack_symmetric(packed: np.ndarray, M: int) -> np.ndarray:
    """Symmetric M x M matrix from its row-major upper triangle."""
    matrix = np.zeros((M, M), dtype=np.result_type(packed, float))
    rows, cols = np.triu_indices(M)
    matrix[rows, cols] = packed
    matrix[cols, rows] = packed
    return matrix


def _broadcast(value: Any, M: int, name: str) -> np.ndarray:
    array = np.atleast_1d(np.asarray(value, dtype=float))
    if array.shape == (1,) and M != 1:
        array = np.full(M, array[0])
    if array.shape != (M,):
        raise ConfigurationError(f"{name} must have length {M}, got shape {array.shape}")
    return array


@dataclass(frozen=True, eq=False)
class NetworkConfig:
    """
    A network of M interacting populations.

    Attributes:
        alpha: Relaxation rates alpha_i (1/time), all > 0
        w: M x M weights; w[i, j] is the effect of population j on population i
        inputs: External inputs I_i
        inverse_sizes: n_i = 1/N_i; 0 means an infinite population
        activations: One activation function per population
        up_rate: Markov up-rate convention
        noise_exponent: Langevin noise amplitude is n_i ** noise_exponent (inf: no noise)
    """

    alpha: np.ndarray
    w: np.ndarray
    inputs: np.ndarray
    inverse_sizes: np.ndarray = None
    activations: Tuple[ActivationFunction, ...] = ()
    up_rate: UpRateMode = UpRateMode.LITERAL
    noise_exponent: float = 1.0

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.w, dtype=float))
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ConfigurationError(f"w must be a square matrix, got shape {w.shape}")
        M = w.shape[0]
        if M < 1:
            raise ConfigurationError("A network needs at least one population")
        alpha = _broadcast(self.alpha, M, "alpha")
        inputs = _broadcast(self.inputs, M, "I")
        n = _broadcast(0.0 if self.inverse_sizes is None else self.inverse_sizes, M, "n")
        if np.any(~(alpha > 0)):
            raise ConfigurationError(f"All alpha_i must be positive, got {alpha.tolist()}")
        if np.any(~(n >= 0)):
            raise ConfigurationError(f"Inverse sizes must be non-negative, got {n.tolist()}")
        if np.any(n > 1.0):
            raise ConfigurationError(f"Population sizes must be at least 1, got n={n.tolist()}")

        activations = tuple(self.activations) or (ActivationFunction(),)
        if len(activations) == 1 and M > 1:
            activations = activations * M
        if len(activations) != M:
            raise ConfigurationError(f"Expected {M} activations, got {len(activations)}")

        for name, value in (("alpha", alpha), ("w", w), ("inputs", inputs), ("inverse_sizes", n)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "activations", activations)
        object.__setattr__(self, "up_rate", UpRateMode(self.up_rate))
        object.__setattr__(self, "noise_exponent", float(self.noise_exponent))

    # ========== Shape & sizes ==========

    @property
    def M(self) -> int:
        return self.w.shape[0]

    @property
    def sizes(self) -> np.ndarray:
        """Population sizes N_i (inf for an infinite population)."""
        sizes = np.full(self.M, np.inf)
        finite = self.inverse_sizes > 0
        sizes[finite] = 1.0 / self.inverse_sizes[finite]
        return sizes

    @property
    def discrete_sizes(self) -> np.ndarray:
        """Integer population sizes; needed by the Markov-chain tools."""
        if np.any(self.inverse_sizes == 0):
            raise ConfigurationError("Markov simulation needs finite population sizes N_i")
        return np.rint(1.0 / self.inverse_sizes).astype(np.int64)

    @property
    def uniform_activation(self) -> bool:
        first = self.activations[0]
        return all(a == first for a in self.activations[1:])

    # ========== Evaluation helpers ==========

    def total_current(self, nu: np.ndarray) -> np.ndarray:
        """s_i = sum_j w_ij nu_j + I_i (also works row-wise on a (P, M) batch)."""
        nu = np.asarray(nu, dtype=float)
        if nu.shape[-1] != self.M:
            raise ConfigurationError(f"Activity vector must have length {self.M}, got {nu.shape}")
        return nu @ self.w.T + self.inputs

    def activation(self, s: np.ndarray, order: int = 0) -> np.ndarray:
        """Order-th derivative of each population's activation at its own current."""
        s = np.asarray(s, dtype=float)
        if self.uniform_activation:
            return self.activations[0].derivative(s, order)
        out = np.empty_like(s)
        for i, act in enumerate(self.activations):
            out[..., i] = act.derivative(s[..., i], order)
        return out

    def activation_derivatives(self, s: np.ndarray, up_to: int = 2) -> Tuple[np.ndarray, ...]:
        return tuple(self.activation(s, k) for k in range(up_to + 1))

    # ========== Parameter access ==========

    def get_param(self, name: str) -> float:
        """Read a scalar parameter by the names accepted by ``with_param``."""
        key, index = _parse_param(name, self.M)
        if key == "I":
            return float(self.inputs[index[0]] if index else self.inputs[0])
        if key == "alpha":
            return float(self.alpha[index[0]] if index else self.alpha[0])
        if key == "n":
            return float(self.inverse_sizes[index[0]] if index else self.inverse_sizes[0])
        if key == "N":
            return float(self.sizes[index[0]] if index else self.sizes[0])
        if key == "w":
            return float(self.w[index] if index else self.w[0, 0])
        return float(self.activations[0].p)

    def with_param(self, name: str, value: float) -> "NetworkConfig":
        """
        Return a copy with one parameter changed.

        Args:
            name: ``I``, ``I<k>``, ``alpha``, ``alpha<k>``, ``n``, ``n<k>``, ``N``,
                ``N<k>``, ``w``, ``w<i><j>`` or ``p`` (1-based indices)
            value: New value; unindexed names set every population

        Returns:
            New NetworkConfig
        """
        key, index = _parse_param(name, self.M)
        value = float(value)
        alpha, w, inputs, n = (np.array(a) for a in (self.alpha, self.w, self.inputs, self.inverse_sizes))
        activations = self.activations
        if key == "I":
            inputs[index if index else slice(None)] = value
        elif key == "alpha":
            alpha[index if index else slice(None)] = value
        elif key == "n":
            n[index if index else slice(None)] = value
        elif key == "N":
            if value < 1:
                raise ConfigurationError(f"Population size must be >= 1, got {value}")
            n[index if index else slice(None)] = 1.0 / value
        elif key == "w":
            if index:
                w[index] = value
            else:
                w[:, :] = value
        else:
            activations = tuple(a.with_p(value) for a in activations)
        return NetworkConfig(alpha, w, inputs, n, activations, self.up_rate, self.noise_exponent)

    def with_up_rate(self, mode: Union[UpRateMode, str]) -> "NetworkConfig":
        """Return a copy using another Markov up-rate convention."""
        try:
            mode = UpRateMode(mode)
        except ValueError as e:
            raise ConfigurationError(f"Unknown up_rate: {mode!r}") from e
        return NetworkConfig(
            self.alpha, self.w, self.inputs, self.inverse_sizes, self.activations, mode, self.noise_exponent
        )

    # ========== Serialization ==========

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the network-file dictionary layout."""
        sizes = [None if math.isinf(v) else v for v in self.sizes.tolist()]
        return {
            "M": self.M,
            "alpha": self.alpha.tolist(),
            "w": self.w.tolist(),
            "I": self.inputs.tolist(),
            "N": sizes,
            "activation": [a.to_dict() for a in self.activations],
            "up_rate": self.up_rate.value,
            "noise_exponent": "inf" if math.isinf(self.noise_exponent) else self.noise_exponent,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NetworkConfig":
        """Create a network from the network-file dictionary layout."""
        if not isinstance(data, dict):
            raise ConfigurationError("A network file must hold a mapping at the top level")
        missing = [k for k in ("w", "I") if k not in data]
        if missing:
            raise ConfigurationError(f"Network file is missing required fields: {missing}")
        w = np.atleast_2d(np.asarray(data["w"], dtype=float))
        M = int(data.get("M", w.shape[0]))
        if w.shape == (1, 1) and M > 1:
            w = np.full((M, M), w[0, 0])
        if w.shape != (M, M):
            raise ConfigurationError(f"w must be {M}x{M}, got shape {w.shape}")

        if "N" in data and data["N"] is not None:
            sizes = _broadcast([np.inf if v is None else v for v in np.atleast_1d(data["N"]).tolist()], M, "N")
            if np.any(sizes < 1):
                raise ConfigurationError(f"All N_i must be >= 1, got {sizes.tolist()}")
            n = np.where(np.isinf(sizes), 0.0, 1.0 / sizes)
        else:
            n = _broadcast(data.get("n", 0.0), M, "n")

        spec = data.get("activation", {"kind": "logistic"})
        specs = spec if isinstance(spec, list) else [spec]
        activations = tuple(ActivationFunction.from_dict(s) for s in specs)

        try:
            up_rate = UpRateMode(data.get("up_rate", UpRateMode.LITERAL.value))
        except ValueError as e:
            raise ConfigurationError(f"Unknown up_rate: {data.get('up_rate')!r}") from e
        return cls(
            alpha=data.get("alpha", 1.0),
            w=w,
            inputs=data["I"],
            inverse_sizes=n,
            activations=activations,
            up_rate=up_rate,
            noise_exponent=float(data.get("noise_exponent", 1.0)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, json_str: str) -> "NetworkConfig":
        return cls.from_dict(json.loads(json_str))

    def __repr__(self) -> str:
        return (
            f"NetworkConfig(M={self.M}, alpha={self.alpha.tolist()}, I={self.inputs.tolist()}, "
            f"n={self.inverse_sizes.tolist()})"
        )


_PARAM_PATTERN = re.compile(r"^(I|alpha|n|N|w|p)(\d*)$")


def _parse_param(name: str, M: int) -> Tuple[str, Tuple[int, ...]]:
    match = _PARAM_PATTERN.match(name.strip())
    if not match:
        raise ConfigurationError(f"Unknown parameter name: {name!r}")
    key, digits = match.groups()
    if key == "p" and digits:
        raise ConfigurationError("Parameter p takes no index")
    if not digits:
        return key, ()
    if key == "w":
        if len(digits) != 2:
            raise ConfigurationError(f"Weight parameters are written w<i><j>, got {name!r}")
        index = (int(digits[0]) - 1, int(digits[1]) - 1)
    else:
        index = (int(digits) - 1,)
    if any(not 0 <= k < M for k in index):
        raise ConfigurationError(f"Parameter index out of range for M={M}: {name!r}")
    return key, index


@dataclass
class MomentState:
    """
    Mean activities and the symmetric second-order block of a moment system.

    Attributes:
        nu: Mean active fractions nu_i
        corr_packed: Row-major upper triangle of the correlation block (empty for
            the Wilson-Cowan system)
    """

    nu: np.ndarray
    corr_packed: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.nu = np.atleast_1d(np.asarray(self.nu, dtype=float))
        corr = np.asarray(self.corr_packed, dtype=float)
        if corr.ndim == 2:
            if not np.array_equal(corr, corr.T):
                raise ConfigurationError("Correlation block must be exactly symmetric")
            corr = pack_symmetric(corr)
        self.corr_packed = np.atleast_1d(corr)
        if self.corr_packed.size not in (0, packed_size(self.M)):
            raise ConfigurationError(
                f"Correlation block of {self.corr_packed.size} entries does not fit M={self.M}"
            )

    @property
    def M(self) -> int:
        return self.nu.size

    @property
    def has_correlations(self) -> bool:
        return self.corr_packed.size > 0

    @property
    def corr(self) -> np.ndarray:
        """Full symmetric correlation matrix (zeros when the block is absent)."""
        if not self.has_correlations:
            return np.zeros((self.M, self.M))
        return unpack_symmetric(self.corr_packed, self.M)

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate([self.nu, self.corr_packed])

    @property
    def dimension(self) -> int:
        return self.nu.size + self.corr_packed.size

    @classmethod
    def from_flat(cls, flat: Sequence[float], M: int) -> "MomentState":
        flat = np.asarray(flat, dtype=float)
        if flat.size not in (M, M + packed_size(M)):
            raise ConfigurationError(f"A flat state for M={M} cannot have {flat.size} entries")
        return cls(flat[:M].copy(), flat[M:].copy())

    @classmethod
    def zeros(cls, M: int, variant: "ModelVariant") -> "MomentState":
        corr = np.zeros(packed_size(M) if ModelVariant.parse(variant).has_correlations else 0)
        return cls(np.zeros(M), corr)

    def for_variant(self, variant: "ModelVariant") -> "MomentState":
        """Drop or add (as zeros) the correlation block to fit a variant."""
        variant = ModelVariant.parse(variant)
        if variant.has_correlations == self.has_correlations:
            return self
        if variant.has_correlations:
            return MomentState(self.nu.copy(), np.zeros(packed_size(self.M)))
        return MomentState(self.nu.copy())

    def check_finite(self) -> None:
        if not np.all(np.isfinite(self.flat)):
            raise EvaluationError(f"Non-finite state: {self.flat.tolist()}")

    def to_dict(self) -> Dict[str, Any]:
        return {"nu": self.nu.tolist(), "corr": self.corr_packed.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MomentState":
        return cls(data["nu"], data.get("corr", []))

    def __repr__(self) -> str:
        return f"MomentState(nu={np.round(self.nu, 6).tolist()}, corr={np.round(self.corr_packed, 6).tolist()})"


@dataclass
class MarkovState:
    """
    State of the Markov jump process.

    Attributes:
        n: Active neuron counts per population
        t: Event clock
        absorbing: True when no transition can fire from this state
    """

    n: np.ndarray
    t: float = 0.0
    absorbing: bool = False

    def __post_init__(self):
        self.n = np.atleast_1d(np.asarray(self.n, dtype=np.int64))

    def proportions(self, sizes: np.ndarray) -> np.ndarray:
        return self.n / np.asarray(sizes, dtype=float)

    def check_bounds(self, sizes: np.ndarray) -> None:
        if np.any(self.n < 0) or np.any(self.n > sizes):
            raise ConfigurationError(f"Counts {self.n.tolist()} outside [0, N] with N={list(sizes)}")

    def __repr__(self) -> str:
        flag = ", absorbing" if self.absorbing else ""
        return f"MarkovState(n={self.n.tolist()}, t={self.t:.6g}{flag})"


# ========== Variable conversions ==========


def cumulant_to_correlation(state: MomentState, net: NetworkConfig) -> MomentState:
    """BCC normal-ordered cumulant c to correlation C = c + diag(nu / N)."""
    corr = state.corr + np.diag(state.nu * net.inverse_sizes)
    return MomentState(state.nu.copy(), pack_symmetric(corr))


def correlation_to_cumulant(state: MomentState, net: NetworkConfig) -> MomentState:
    """Correlation C to the BCC normal-ordered cumulant c = C - diag(nu / N)."""
    corr = state.corr - np.diag(state.nu * net.inverse_sizes)
    return MomentState(state.nu.copy(), pack_symmetric(corr))


def rescaled_to_original_bressloff(state: MomentState, net: NetworkConfig) -> MomentState:
    """Rescaled Bressloff C to the original variables n_ij = N C_ij (equal sizes only)."""
    sizes = net.sizes
    if not np.allclose(sizes, sizes[0]) or np.isinf(sizes[0]):
        raise ConfigurationError("The original Bressloff variables need equal finite sizes")
    return MomentState(state.nu.copy(), state.corr_packed * sizes[0])


def original_to_rescaled_bressloff(state: MomentState, net: NetworkConfig) -> MomentState:
    """Inverse of ``rescaled_to_original_bressloff``."""
    sizes = net.sizes
    if not np.allclose(sizes, sizes[0]) or np.isinf(sizes[0]):
        raise ConfigurationError("The original Bressloff variables need equal finite sizes")
    return MomentState(state.nu.copy(), state.corr_packed / sizes[0])


def empirical_moments(counts: np.ndarray, sizes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Mean proportions and second moments <p_i p_j> from a (P, M) array of counts."""
    p = np.asarray(counts, dtype=float) / np.asarray(sizes, dtype=float)
    return p.mean(axis=0), (p[:, :, None] * p[:, None, :]).mean(axis=0)


def state_labels(M: int, with_corr: bool) -> List[str]:
    """Column names nu_1..nu_M then corr_ij over the upper triangle."""
    labels = [f"nu_{i + 1}" for i in range(M)]
    if with_corr:
        rows, cols = np.triu_indices(M)
        labels += [f"corr_{i + 1}{j + 1}" for i, j in zip(rows, cols)]
    return labels


def coordinate_index(name: str, M: int) -> int:
    """Index of a named coordinate (``nu_2``, ``corr_12``) in a flat state."""
    labels = state_labels(M, True)
    try:
        return labels.index(name)
    except ValueError as e:
        raise ConfigurationError(f"Unknown coordinate {name!r}; expected one of {labels}") from e

