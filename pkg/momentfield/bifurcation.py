"""
Bifurcation analysis of the moment systems.

One-parameter sweeps follow equilibrium and cycle branches by
pseudo-arclength continuation and flag saddle-node, Hopf, fold-of-cycles,
Neimark-Sacker and period-doubling points. Two-parameter continuation
follows fold and Hopf points in a plane such as (I1, n) and flags cusps and
Bogdanov-Takens candidates. Hysteresis sweeps step a parameter up and down,
carrying the state from one value to the next.

Example:
    from momentfield.bifurcation import ParameterAxis, sweep_equilibria

    atlas = sweep_equilibria("bcc", net, ParameterAxis("I", -10.0, 0.0))
    for point in atlas.points:
        print(point.label, point.parameters)
"""
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from momentfield.config import SolverControls
from momentfield.exceptions import ConfigurationError, CycleNotFoundError
from momentfield.integrate import (
    SHOOTING_TIGHTENING,
    LimitCycle,
    classify_cycle,
    flow_and_monodromy,
    integrate,
    nontrivial_multipliers,
)
from momentfield.models import MarkovState, ModelVariant, MomentState, NetworkConfig
from momentfield.numerics import ContinuationSettings, CurveTrace, CurveTracer, fd_jacobian, newton
from momentfield.stochastic.ensemble import run_ensemble
from momentfield.steady_state import (
    StabilityClass,
    classify_eigenvalues,
    find_fixed_points,
    is_admissible,
    jacobian,
)
from momentfield.systems import flat_field

logger = logging.getLogger(__name__)

IMAG_THRESHOLD = 1e-4
FOLD_CERTIFICATE = 1e-5
HOPF_CERTIFICATE = 1e-6
BT_FREQUENCY = 1e-3
INVERSE_SIZE_BOUNDS = (1e-5, 0.05)
STATE_BOX = (-1.0, 2.0)
HOMOCLINIC_PERIOD_FACTOR = 50.0
RESONANCE_WIDTH = 0.05
# Step of the inner finite-difference Jacobian inside extended systems, and of the outer one
INNER_STEP = 1e-5
OUTER_STEP = 1e-4


class BifurcationKind(str, Enum):
    SADDLE_NODE = "LP"
    HOPF = "H"
    FOLD_OF_CYCLES = "LPC"
    NEIMARK_SACKER = "NS"
    PERIOD_DOUBLING = "PD"
    CUSP = "CP"
    BOGDANOV_TAKENS = "BT"
    HOMOCLINIC = "HC"


@dataclass(frozen=True)
class ParameterAxis:
    """
    A continuation parameter and its range.

    Attributes:
        name: Parameter name as accepted by NetworkConfig.with_param
        lower: Lower end of the range
        upper: Upper end of the range
        scale: Internal unit of the parameter (default 0.01 for inverse sizes, else 1)
    """

    name: str
    lower: float
    upper: float
    scale: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)) or self.upper <= self.lower:
            raise ConfigurationError(f"Empty parameter range for {self.name}: [{self.lower}, {self.upper}]")

    @property
    def unit(self) -> float:
        if self.scale is not None:
            return float(self.scale)
        return 0.01 if self.name.startswith("n") else 1.0

    @property
    def is_inverse_size(self) -> bool:
        return self.name.startswith("n")

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "lower": self.lower, "upper": self.upper}


# ========== Records ==========


@dataclass
class BifurcationPoint:
    """
    A detected and refined bifurcation.

    Attributes:
        kind: Bifurcation type
        parameters: Parameter values at the point
        state: State at the point (cycle anchor for cycle bifurcations)
        residual: Test-function value after refinement
        eigenvalues: Jacobian eigenvalues, or Floquet multipliers for cycle points
        admissible: Activities in [0, 1] and PSD correlations
        low_confidence: Certificate failed, near a strong resonance, or heuristic
        frequency: Hopf frequency or period-related data where meaningful
        label: Atlas label such as LP1 or H2
    """

    kind: BifurcationKind
    parameters: Dict[str, float]
    state: MomentState
    residual: float
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    admissible: bool = True
    low_confidence: bool = False
    frequency: Optional[float] = None
    label: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "kind": self.kind.value,
            "parameters": dict(self.parameters),
            "state": self.state.to_dict(),
            "residual": self.residual,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "admissible": self.admissible,
            "low_confidence": self.low_confidence,
            "frequency": self.frequency,
        }

    def __repr__(self) -> str:
        params = ", ".join(f"{k}={v:.6g}" for k, v in self.parameters.items())
        return f"BifurcationPoint({self.label or self.kind.value}, {params})"


@dataclass
class Branch:
    """
    An equilibrium branch in arclength order.

    Attributes:
        parameter: Continuation parameter
        values: Parameter value per point
        states: Flat states, one row per point
        stability: StabilityClass value per point
        admissible: Admissibility per point
        termination: "range-end", "left-box", "step-underflow" or "max-points"
    """

    parameter: str
    values: np.ndarray
    states: np.ndarray
    stability: List[str]
    admissible: np.ndarray
    termination: str

    @property
    def truncated(self) -> bool:
        return self.termination != "range-end"

    def __len__(self) -> int:
        return len(self.values)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "parameter": self.parameter,
            "values": self.values.tolist(),
            "states": self.states.tolist(),
            "stability": list(self.stability),
            "admissible": self.admissible.tolist(),
            "termination": self.termination,
            "truncated": self.truncated,
        }


@dataclass
class CycleBranch:
    """
    A branch of limit cycles.

    Attributes:
        parameter: Continuation parameter
        values: Parameter value per point
        periods: Period per point
        minima: Per-coordinate minimum over the orbit
        maxima: Per-coordinate maximum over the orbit
        multipliers: Floquet multipliers per point
        stability: CycleStability value per point
        termination: Why the continuation stopped
    """

    parameter: str
    values: np.ndarray
    periods: np.ndarray
    minima: np.ndarray
    maxima: np.ndarray
    multipliers: List[np.ndarray]
    stability: List[str]
    termination: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "parameter": self.parameter,
            "values": self.values.tolist(),
            "periods": self.periods.tolist(),
            "minima": self.minima.tolist(),
            "maxima": self.maxima.tolist(),
            "multipliers": [[[float(z.real), float(z.imag)] for z in m] for m in self.multipliers],
            "stability": list(self.stability),
            "termination": self.termination,
        }


@dataclass
class Curve:
    """
    A codimension-two curve in a parameter plane.

    Attributes:
        kind: SADDLE_NODE or HOPF
        plane: Names of the two parameters
        points: Parameter pairs in arclength order
        states: Flat states along the curve
        admissible: Admissibility per point
        termination: Termination of the backward and forward halves
        singular_endpoint: The curve ran into the lower inverse-size bound
        frequencies: Hopf frequency per point (Hopf curves only)
        label: Label of the seed point
    """

    kind: BifurcationKind
    plane: Tuple[str, str]
    points: np.ndarray
    states: np.ndarray
    admissible: np.ndarray
    termination: Tuple[str, str]
    singular_endpoint: bool = False
    frequencies: Optional[np.ndarray] = None
    label: str = ""

    @property
    def truncated(self) -> bool:
        return any(t == "left-domain" for t in self.termination)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "kind": self.kind.value,
            "plane": list(self.plane),
            "points": self.points.tolist(),
            "states": self.states.tolist(),
            "admissible": self.admissible.tolist(),
            "termination": list(self.termination),
            "singular_endpoint": self.singular_endpoint,
            "frequencies": None if self.frequencies is None else self.frequencies.tolist(),
        }


@dataclass
class BifurcationAtlas:
    """
    Everything one analysis found.

    Attributes:
        variant: System analysed
        ranges: Parameter ranges swept
        branches: Equilibrium branches
        cycle_branches: Limit-cycle branches
        points: Detected bifurcation points
        curves: Codimension-two curves
    """

    variant: ModelVariant
    ranges: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    branches: List[Branch] = field(default_factory=list)
    cycle_branches: List[CycleBranch] = field(default_factory=list)
    points: List[BifurcationPoint] = field(default_factory=list)
    curves: List[Curve] = field(default_factory=list)

    def points_of(self, kind: Union[BifurcationKind, str]) -> List[BifurcationPoint]:
        kind = BifurcationKind(kind)
        return [p for p in self.points if p.kind is kind]

    def assign_labels(self) -> None:
        """Number the points per kind in order of appearance (LP1, LP2, H1, ...)."""
        counters: Dict[BifurcationKind, int] = {}
        for point in self.points:
            counters[point.kind] = counters.get(point.kind, 0) + 1
            point.label = f"{point.kind.value}{counters[point.kind]}"

    def merge(self, other: "BifurcationAtlas") -> "BifurcationAtlas":
        """Concatenate another atlas into this one (deterministic order: self first)."""
        self.ranges.update(other.ranges)
        self.branches.extend(other.branches)
        self.cycle_branches.extend(other.cycle_branches)
        self.points.extend(other.points)
        self.curves.extend(other.curves)
        self.assign_labels()
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variant": self.variant.value,
            "ranges": {k: list(v) for k, v in self.ranges.items()},
            "branches": [b.to_dict() for b in self.branches],
            "cycle_branches": [b.to_dict() for b in self.cycle_branches],
            "points": [p.to_dict() for p in self.points],
            "curves": [c.to_dict() for c in self.curves],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def __repr__(self) -> str:
        kinds = ", ".join(f"{k.value}={len(self.points_of(k))}" for k in BifurcationKind if self.points_of(k))
        return f"BifurcationAtlas({self.variant.value}, branches={len(self.branches)}, {kinds or 'no points'})"


# ========== Helpers ==========


def _in_box(x: np.ndarray, M: int) -> bool:
    return bool(np.all(np.isfinite(x)) and np.all(x[:M] > STATE_BOX[0]) and np.all(x[:M] < STATE_BOX[1]))


def _net_at(net: NetworkConfig, axes: Sequence[ParameterAxis], internal: Sequence[float]) -> NetworkConfig:
    for axis, u in zip(axes, internal):
        net = net.with_param(axis.name, u * axis.unit)
    return net


def _match_eigenvalues(before: np.ndarray, after: np.ndarray) -> np.ndarray:
    """Index in ``after`` of the continuation of each eigenvalue of ``before``."""
    rows, cols = linear_sum_assignment(np.abs(before[:, None] - after[None, :]))
    matched = np.empty(before.size, dtype=int)
    matched[rows] = cols
    return matched


def _hopf_crossings(before: np.ndarray, after: np.ndarray) -> List[Tuple[complex, complex]]:
    """
    Complex pairs whose real part changes sign between two consecutive spectra.

    Eigenvalues are followed by minimum total displacement. A pair that meets
    the real axis between the two steps is a collision, not a crossing.
    """
    matched = _match_eigenvalues(before, after)
    crossings = []
    for i, lam in enumerate(before):
        mu = after[matched[i]]
        if lam.imag > IMAG_THRESHOLD and mu.imag > IMAG_THRESHOLD and lam.real * mu.real < 0:
            crossings.append((complex(lam), complex(mu)))
    return crossings


class _TrackedEigenvalue:
    """Real part of one eigenvalue, followed by continuity from call to call."""

    def __init__(self, spectrum: Callable[[np.ndarray], np.ndarray], start: complex):
        self.spectrum = spectrum
        self.current = start

    def __call__(self, y: np.ndarray, t: np.ndarray) -> float:
        eigenvalues = self.spectrum(y)
        nearest = complex(eigenvalues[np.argmin(np.abs(eigenvalues - self.current))])
        self.current = nearest if nearest.imag >= 0 else nearest.conjugate()
        return self.current.real


def _near_resonance(multiplier: complex) -> bool:
    angle = abs(np.angle(multiplier))
    return any(abs(angle - 2.0 * math.pi * k / q) < RESONANCE_WIDTH for q in (1, 2, 3, 4) for k in range(q + 1))


# ========== Equilibrium sweeps ==========


class _EquilibriumContinuation:
    def __init__(self, variant: ModelVariant, net: NetworkConfig, axis: ParameterAxis, settings: ContinuationSettings):
        self.variant = variant
        self.net = net
        self.axis = axis
        self.tracer = CurveTracer(self.residual, settings)

    def net_at(self, u: float) -> NetworkConfig:
        return self.net.with_param(self.axis.name, u * self.axis.unit)

    def residual(self, y: np.ndarray) -> np.ndarray:
        return flat_field(self.variant, self.net_at(y[-1]))(0.0, y[:-1])

    def inside(self, y: np.ndarray) -> bool:
        return _in_box(y[:-1], self.net.M)

    def in_range(self, y: np.ndarray, t: np.ndarray) -> bool:
        return not self.axis.contains(y[-1] * self.axis.unit)

    def eigenvalues(self, y: np.ndarray) -> np.ndarray:
        state = MomentState.from_flat(y[:-1], self.net.M)
        return np.linalg.eigvals(jacobian(self.variant, state, self.net_at(y[-1])))

    def point(self, kind: BifurcationKind, y: np.ndarray, residual: float) -> BifurcationPoint:
        state = MomentState.from_flat(y[:-1], self.net.M)
        net_p = self.net_at(y[-1])
        eigenvalues = self.eigenvalues(y)
        if kind is BifurcationKind.SADDLE_NODE:
            certified = float(np.min(np.abs(eigenvalues))) < FOLD_CERTIFICATE
            frequency = None
        else:
            complex_ = eigenvalues[np.abs(eigenvalues.imag) > IMAG_THRESHOLD]
            crossing = complex_[np.argmin(np.abs(complex_.real))] if complex_.size else 0j
            certified = complex_.size > 0 and abs(crossing.real) < HOPF_CERTIFICATE
            frequency = abs(float(crossing.imag))
        if not certified:
            logger.warning(f"{kind.value} at {self.axis.name}={y[-1] * self.axis.unit:.6g} failed its certificate")
        return BifurcationPoint(
            kind,
            {self.axis.name: float(y[-1] * self.axis.unit)},
            state,
            float(residual),
            eigenvalues,
            is_admissible(self.variant, state, net_p),
            not certified,
            frequency,
        )

    def trace(self, y0: np.ndarray, sign: int) -> CurveTrace:
        """Trace towards larger (+1) or smaller (-1) parameter values, or both ways (0)."""
        if sign:
            orientation = np.zeros_like(y0)
            orientation[-1] = sign
            return self.tracer.trace(y0, orientation, inside=self.inside, stop=self.in_range)
        backward, forward = self.trace(y0, -1), self.trace(y0, 1)
        termination = backward.termination if backward.termination != "stopped" else forward.termination
        return CurveTrace(
            list(reversed(backward.points)) + forward.points[1:],
            [-t for t in reversed(backward.tangents)] + forward.tangents[1:],
            termination,
        )

    def scan(self, trace: CurveTrace) -> Tuple[Branch, List[BifurcationPoint]]:
        ys = trace.points
        spectra = [self.eigenvalues(y) for y in ys]
        points: List[BifurcationPoint] = []
        for k in range(len(ys) - 1):
            t_a, t_b = trace.tangents[k][-1], trace.tangents[k + 1][-1]
            if t_a * t_b < 0:
                refined = self.tracer.bisect(ys[k], ys[k + 1], lambda y, t: t[-1], trace.tangents[k], tol=1e-10)
                y_fold, value = (refined[0], refined[2]) if refined else (0.5 * (ys[k] + ys[k + 1]), t_b)
                points.append(self.point(BifurcationKind.SADDLE_NODE, y_fold, value))
            for lam_a, _ in _hopf_crossings(spectra[k], spectra[k + 1]):
                hopf = self._refine_hopf(ys[k], ys[k + 1], trace.tangents[k], lam_a)
                if hopf is not None:
                    points.append(hopf)

        states = np.array([y[:-1] for y in ys])
        values = np.array([y[-1] * self.axis.unit for y in ys])
        stability = [classify_eigenvalues(s).value for s in spectra]
        admissible = np.array([
            is_admissible(self.variant, MomentState.from_flat(y[:-1], self.net.M), self.net_at(y[-1])) for y in ys
        ])
        termination = {"stopped": "range-end", "left-domain": "left-box"}.get(trace.termination, trace.termination)
        if termination != "range-end":
            logger.warning(f"Branch truncated ({termination}) after {len(ys)} points")
        return Branch(self.axis.name, values, states, stability, admissible, termination), points

    def _refine_hopf(
        self, y_a: np.ndarray, y_b: np.ndarray, orientation: np.ndarray, start: complex
    ) -> Optional[BifurcationPoint]:
        """Bisect on the tracked pair; detections failing the certificate are dropped."""
        tracked = _TrackedEigenvalue(self.eigenvalues, start)
        refined = self.tracer.bisect(y_a, y_b, tracked, orientation, tol=1e-10)
        if refined is None:
            logger.warning(f"Hopf refinement near {self.axis.name}={y_b[-1] * self.axis.unit:.6g} failed; dropped")
            return None
        hopf = self.point(BifurcationKind.HOPF, refined[0], refined[2])
        return None if hopf.low_confidence else hopf


def _covered(cont: _EquilibriumContinuation, branches: Sequence[CurveTrace], y: np.ndarray, tol: float = 1e-6) -> bool:
    """True if a traced branch passes through the equilibrium y at its parameter value."""
    fun = flat_field(cont.variant, cont.net_at(y[-1]))
    for trace in branches:
        for a, b in zip(trace.points[:-1], trace.points[1:]):
            if (a[-1] - y[-1]) * (b[-1] - y[-1]) > 0 or a[-1] == b[-1]:
                continue
            theta = (y[-1] - a[-1]) / (b[-1] - a[-1])
            guess = a[:-1] + theta * (b[:-1] - a[:-1])
            solved = newton(lambda z: fun(0.0, z), guess, max_iter=20)
            if solved.converged and np.max(np.abs(solved.x - y[:-1])) < tol * max(1.0, np.max(np.abs(y[:-1]))):
                return True
    return False


def _deduplicate_points(points: List[BifurcationPoint], tol: float = 1e-6) -> List[BifurcationPoint]:
    unique: List[BifurcationPoint] = []
    for p in points:
        duplicate = any(
            q.kind is p.kind
            and all(abs(q.parameters[k] - p.parameters[k]) < tol for k in p.parameters)
            and np.max(np.abs(q.state.flat - p.state.flat)) < 1e-4
            for q in unique
        )
        if not duplicate:
            unique.append(p)
    return unique


def sweep_equilibria(
    variant: Union[ModelVariant, str],
    net: NetworkConfig,
    axis: ParameterAxis,
    seeds: Optional[Sequence[Tuple[float, MomentState]]] = None,
    settings: Optional[ContinuationSettings] = None,
    workers: int = 1,
    seed_values: int = 3,
) -> BifurcationAtlas:
    """
    Continue every equilibrium branch across a parameter range.

    Seeds default to all fixed points found at ``seed_values`` evenly spaced
    parameter values (ends included). End seeds are traced into the range,
    interior seeds both ways; seeds already lying on a traced branch are skipped.

    Args:
        variant: Which system
        net: Network parameters (the swept parameter's own value is ignored)
        axis: Parameter and range
        seeds: Optional (parameter value, state) pairs
        settings: Step control
        workers: Threads tracing independent seeds
        seed_values: Number of seed parameter values

    Returns:
        BifurcationAtlas with branches and LP/H points
    """
    variant = ModelVariant.parse(variant)
    cont = _EquilibriumContinuation(variant, net, axis, settings or ContinuationSettings())
    if seeds is None:
        seeds = []
        for value in np.linspace(axis.lower, axis.upper, max(2, seed_values)):
            seeds += [(float(value), fp.state) for fp in find_fixed_points(variant, net.with_param(axis.name, value))]

    rounds: List[List[Tuple[np.ndarray, int]]] = [[], [], []]
    for value, state in seeds:
        y0 = np.append(state.for_variant(variant).flat, value / axis.unit)
        if value <= axis.lower:
            rounds[0].append((y0, 1))
        elif value >= axis.upper:
            rounds[1].append((y0, -1))
        else:
            rounds[2].append((y0, 0))

    traces: List[CurveTrace] = []
    for jobs in rounds:
        batch = [job for job in jobs if not _covered(cont, traces, job[0])]
        if not batch:
            continue
        with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
            traced = list(executor.map(lambda job: cont.trace(*job), batch))
        # seeds of one round may share a branch; keep the first trace through it
        for (y0, _), trace in zip(batch, traced):
            if not _covered(cont, traces, y0):
                traces.append(trace)

    atlas = BifurcationAtlas(variant, {axis.name: (axis.lower, axis.upper)})
    for trace in traces:
        branch, points = cont.scan(trace)
        atlas.branches.append(branch)
        atlas.points.extend(points)
    atlas.points = _deduplicate_points(atlas.points)
    atlas.assign_labels()
    logger.info(f"Equilibrium sweep over {axis.name}: {atlas}")
    return atlas


# ========== Cycle sweeps ==========


class _ShootingContinuation:
    """Shooting equations (x(T) - x, phase) continued in one parameter."""

    def __init__(
        self,
        variant: ModelVariant,
        net: NetworkConfig,
        axis: ParameterAxis,
        controls: SolverControls,
        settings: ContinuationSettings,
    ):
        self.variant = variant
        self.net = net
        self.axis = axis
        self.controls = controls
        self.anchor = np.zeros(0)
        self.normal = np.zeros(0)
        self._u = net.get_param(axis.name) / axis.unit
        self.tracer = CurveTracer(self.residual, settings, jacobian=self.jacobian)

    def net_at(self, u: float) -> NetworkConfig:
        return self.net.with_param(self.axis.name, u * self.axis.unit)

    def reanchor(self, x: np.ndarray) -> None:
        """Move the phase hyperplane to pass through x, normal to the flow."""
        velocity = flat_field(self.variant, self.net_at(self._u))(0.0, x)
        self.anchor = np.array(x)
        self.normal = velocity / np.linalg.norm(velocity)

    def _flow(self, x: np.ndarray, T: float, u: float):
        net_p = self.net_at(u)
        fun = flat_field(self.variant, net_p)
        return flow_and_monodromy(
            fun, lambda t, z: fd_jacobian(lambda v: fun(0.0, v), z), x, T, self.controls
        )

    def residual(self, y: np.ndarray) -> np.ndarray:
        x, T, u = y[:-2], y[-2], y[-1]
        x_end, _ = self._flow(x, T, u)
        return np.append(x_end - x, self.normal @ (x - self.anchor))

    def jacobian(self, y: np.ndarray) -> np.ndarray:
        x, T, u = y[:-2], y[-2], y[-1]
        d = x.size
        x_end, phi = self._flow(x, T, u)
        h = 1e-6 * max(1.0, abs(u))
        dflow = (self._flow(x, T, u + h)[0] - self._flow(x, T, u - h)[0]) / (2.0 * h)
        J = np.zeros((d + 1, d + 2))
        J[:d, :d] = phi - np.eye(d)
        J[:d, d] = flat_field(self.variant, self.net_at(u))(0.0, x_end)
        J[:d, d + 1] = dflow
        J[d, :d] = self.normal
        return J

    def multipliers(self, y: np.ndarray) -> np.ndarray:
        return np.linalg.eigvals(self._flow(y[:-2], y[-2], y[-1])[1])

    def start(self, cycle: LimitCycle, u: float) -> np.ndarray:
        self._u = u
        x = cycle.anchor.for_variant(self.variant).flat
        self.reanchor(x)
        return np.concatenate([x, [cycle.period, u]])


def _ns_test(multipliers: np.ndarray) -> float:
    """Largest complex multiplier modulus minus one (nan without a complex pair)."""
    others = nontrivial_multipliers(multipliers)
    complex_ = others[np.abs(others.imag) > 1e-6]
    return float(np.max(np.abs(complex_)) - 1.0) if complex_.size else math.nan


def _pd_test(multipliers: np.ndarray) -> float:
    real = multipliers[np.abs(multipliers.imag) <= 1e-6].real
    return float(-np.min(real) - 1.0) if real.size else -1.0


def _nearby_saddle(variant: ModelVariant, state: MomentState, period: float, net: NetworkConfig) -> Optional[MomentState]:
    """Equilibrium near the slowest point of an orbit, if it is a saddle."""
    traj = integrate(variant, state, net, period, n_points=400)
    fun = flat_field(variant, net)
    speeds = np.array([np.linalg.norm(fun(0.0, y)) for y in traj.states])
    solved = newton(lambda z: fun(0.0, z), traj.states[int(np.argmin(speeds))])
    if not solved.converged:
        return None
    candidate = MomentState.from_flat(solved.x, net.M)
    spectrum = np.linalg.eigvals(jacobian(variant, candidate, net))
    return candidate if classify_eigenvalues(spectrum) is StabilityClass.SADDLE else None


def sweep_cycles(
    variant: Union[ModelVariant, str],
    net: NetworkConfig,
    axis: ParameterAxis,
    seed: LimitCycle,
    direction: float = 1.0,
    settings: Optional[ContinuationSettings] = None,
    controls: Optional[SolverControls] = None,
) -> BifurcationAtlas:
    """
    Continue a limit cycle in one parameter and track its Floquet multipliers.

    The phase hyperplane is moved to every accepted cycle. Folds of cycles are
    sign changes of the parameter component of the tangent, Neimark-Sacker
    points are complex multipliers crossing the unit circle and period
    doublings are real multipliers crossing -1. A period beyond 50/alpha
    with a saddle near the orbit ends the branch with a homoclinic flag.

    Args:
        variant: Which system
        net: Network parameters at the seed
        axis: Parameter and range; the seed's parameter value is read from net
        seed: A cycle from find_cycle
        direction: +1 to start towards larger parameter values, -1 otherwise
        settings: Step control
        controls: Integrator tolerances of the shooting flow

    Returns:
        BifurcationAtlas with one cycle branch and LPC/NS/PD/HC points
    """
    variant = ModelVariant.parse(variant)
    settings = settings or ContinuationSettings(max_points=400, tol=1e-8)
    controls = controls or SolverControls().scaled(SHOOTING_TIGHTENING)
    cont = _ShootingContinuation(variant, net, axis, controls, settings)
    u0 = net.get_param(axis.name) / axis.unit
    y0 = cont.start(seed, u0)
    d = y0.size - 2
    alpha_min = float(np.min(net.alpha))
    state: Dict[str, Any] = {"termination": None, "homoclinic": None}

    def inside(y):
        return y[-2] > 0 and _in_box(y[:d], net.M)

    def stop(y, t):
        cont._u = y[-1]
        cont.reanchor(y[:d])
        if not axis.contains(y[-1] * axis.unit):
            state["termination"] = "range-end"
            return True
        if y[-2] > HOMOCLINIC_PERIOD_FACTOR / alpha_min:
            saddle = _nearby_saddle(variant, MomentState.from_flat(y[:d], net.M), y[-2], cont.net_at(y[-1]))
            if saddle is not None:
                state["termination"] = "homoclinic"
                state["homoclinic"] = (y, saddle)
                return True
        return False

    orientation = np.zeros_like(y0)
    orientation[-1] = direction
    trace = cont.tracer.trace(y0, orientation, inside=inside, stop=stop)
    ys = trace.points
    spectra = [cont.multipliers(y) for y in ys]

    atlas = BifurcationAtlas(variant, {axis.name: (axis.lower, axis.upper)})
    for k in range(len(ys) - 1):
        cont._u = ys[k][-1]
        cont.reanchor(ys[k][:d])
        tests = []
        if trace.tangents[k][-1] * trace.tangents[k + 1][-1] < 0:
            tests.append((BifurcationKind.FOLD_OF_CYCLES, lambda y, t: t[-1]))
        if _ns_test(spectra[k]) * _ns_test(spectra[k + 1]) < 0:
            tests.append((BifurcationKind.NEIMARK_SACKER, lambda y, t: _ns_test(cont.multipliers(y))))
        if _pd_test(spectra[k]) * _pd_test(spectra[k + 1]) < 0:
            tests.append((BifurcationKind.PERIOD_DOUBLING, lambda y, t: _pd_test(cont.multipliers(y))))
        for kind, test in tests:
            refined = cont.tracer.bisect(ys[k], ys[k + 1], test, trace.tangents[k], tol=1e-9, max_iter=40)
            y_star, value = (refined[0], refined[2]) if refined else (ys[k + 1], float("nan"))
            multipliers = cont.multipliers(y_star)
            low = refined is None
            if kind is BifurcationKind.NEIMARK_SACKER:
                others = nontrivial_multipliers(multipliers)
                crossing = others[np.argmin(np.abs(np.abs(others) - 1.0))]
                low = low or _near_resonance(crossing)
            state_star = MomentState.from_flat(y_star[:d], net.M)
            atlas.points.append(BifurcationPoint(
                kind, {axis.name: float(y_star[-1] * axis.unit)}, state_star, float(value), multipliers,
                is_admissible(variant, state_star, cont.net_at(y_star[-1])), low, float(y_star[-2]),
            ))
            if low:
                logger.warning(f"Low-confidence {kind.value} near {axis.name}={y_star[-1] * axis.unit:.6g}")

    if state["homoclinic"] is not None:
        y_h, saddle = state["homoclinic"]
        atlas.points.append(BifurcationPoint(
            BifurcationKind.HOMOCLINIC, {axis.name: float(y_h[-1] * axis.unit)}, saddle, float(y_h[-2]),
            low_confidence=True, frequency=float(y_h[-2]),
        ))

    minima, maxima = [], []
    for y in ys:
        orbit = integrate(variant, MomentState.from_flat(y[:d], net.M), cont.net_at(y[-1]), y[-2], n_points=200)
        minima.append(orbit.states.min(axis=0))
        maxima.append(orbit.states.max(axis=0))
    termination = state["termination"] or {"left-domain": "left-box"}.get(trace.termination, trace.termination)
    atlas.cycle_branches.append(CycleBranch(
        axis.name,
        np.array([y[-1] * axis.unit for y in ys]),
        np.array([y[-2] for y in ys]),
        np.array(minima),
        np.array(maxima),
        spectra,
        [classify_cycle(m).value for m in spectra],
        termination,
    ))
    atlas.assign_labels()
    logger.info(f"Cycle sweep over {axis.name}: {len(ys)} cycles, {atlas}")
    return atlas


# ========== Codimension-two continuation ==========


class _ExtendedSystem:
    """Equilibrium plus fold or Hopf condition, continued in two parameters."""

    def __init__(
        self,
        kind: BifurcationKind,
        variant: ModelVariant,
        net: NetworkConfig,
        plane: Tuple[ParameterAxis, ParameterAxis],
        reference: np.ndarray,
        settings: ContinuationSettings,
    ):
        self.kind = kind
        self.variant = variant
        self.net = net
        self.plane = plane
        self.reference = reference
        self.d = reference.size
        self.tracer = CurveTracer(
            self.residual, settings, jacobian=lambda y: fd_jacobian(self.residual, y, rel_step=OUTER_STEP)
        )

    def net_at(self, y: np.ndarray) -> NetworkConfig:
        return _net_at(self.net, self.plane, y[-2:])

    def residual(self, y: np.ndarray) -> np.ndarray:
        d = self.d
        fun = flat_field(self.variant, self.net_at(y))
        x = y[:d]
        J = fd_jacobian(lambda z: fun(0.0, z), x, rel_step=INNER_STEP)
        if self.kind is BifurcationKind.SADDLE_NODE:
            v = y[d:2 * d]
            return np.concatenate([fun(0.0, x), J @ v, [self.reference @ v - 1.0]])
        vr, vi, omega = y[d:2 * d], y[2 * d:3 * d], y[3 * d]
        return np.concatenate([
            fun(0.0, x), J @ vr + omega * vi, J @ vi - omega * vr,
            [self.reference @ vr - 1.0, self.reference @ vi],
        ])

    def parameters(self, y: np.ndarray) -> Tuple[float, float]:
        return tuple(float(u * axis.unit) for axis, u in zip(self.plane, y[-2:]))

    def frequency(self, y: np.ndarray) -> float:
        return float(y[3 * self.d]) if self.kind is BifurcationKind.HOPF else float("nan")

    def inside(self, y: np.ndarray) -> bool:
        p, q = self.parameters(y)
        return self.plane[0].contains(p) and self.plane[1].contains(q) and _in_box(y[:self.d], self.net.M)


def _extended_start(
    kind: BifurcationKind, variant: ModelVariant, state: MomentState, net: NetworkConfig
) -> Tuple[np.ndarray, np.ndarray]:
    """Initial (x, eigen data) block and the normalisation vector."""
    x = state.for_variant(variant).flat
    eigenvalues, vectors = np.linalg.eig(jacobian(variant, state, net))
    if kind is BifurcationKind.SADDLE_NODE:
        k = int(np.argmin(np.abs(eigenvalues)))
        v = np.real(vectors[:, k])
        v = v / np.linalg.norm(v)
        return np.concatenate([x, v]), v
    k = int(np.argmax(np.where(eigenvalues.imag > 0, -np.abs(eigenvalues.real), -np.inf)))
    q = vectors[:, k]
    reference = np.real(q) / np.linalg.norm(np.real(q))
    q = q / (reference @ q)
    return np.concatenate([x, q.real, q.imag, [abs(eigenvalues[k].imag)]]), reference


def continue_codim2(
    variant: Union[ModelVariant, str],
    net: NetworkConfig,
    point: BifurcationPoint,
    plane: Tuple[ParameterAxis, ParameterAxis],
    settings: Optional[ContinuationSettings] = None,
) -> BifurcationAtlas:
    """
    Continue a saddle-node or Hopf point in a parameter plane.

    Folds use the bordered system F = 0, J v = 0, v0 . v = 1; Hopf points use
    F = 0, J vr + w vi = 0, J vi - w vr = 0, c . vr = 1, c . vi = 0. The curve
    is traced both ways from the point. Cusps are flagged where a fold curve
    reverses in the first parameter and Bogdanov-Takens candidates where the
    Hopf frequency drops below 1e-3.

    Args:
        variant: Which system
        net: Network parameters holding the second parameter's start value
        point: A refined LP or H point (its parameters hold the first one)
        plane: (first, second) axes; an inverse-size second axis defaults to
            the range (1e-5, 0.05]
        settings: Step control

    Returns:
        BifurcationAtlas with one curve and any CP/BT points
    """
    variant = ModelVariant.parse(variant)
    if point.kind not in (BifurcationKind.SADDLE_NODE, BifurcationKind.HOPF):
        raise ConfigurationError(f"Only LP and H points can be continued, got {point.kind.value}")
    first, second = plane
    settings = settings or ContinuationSettings(max_step=0.05, tol=1e-9)
    p0 = point.parameters.get(first.name, net.get_param(first.name))
    net0 = net.with_param(first.name, p0)
    q0 = net0.get_param(second.name)
    if not second.contains(q0):
        raise ConfigurationError(f"{second.name}={q0} lies outside [{second.lower}, {second.upper}]")

    block, reference = _extended_start(point.kind, variant, point.state, net0)
    system = _ExtendedSystem(point.kind, variant, net, (first, second), reference, settings)
    y0 = np.concatenate([block, [p0 / first.unit, q0 / second.unit]])
    normal = np.zeros_like(y0)
    normal[-1] = 1.0
    polished = system.tracer.correct(y0, normal)
    if not polished.converged:
        raise CycleNotFoundError(
            f"Could not polish {point.label or point.kind.value} onto its defining system",
            polished.iterations, polished.residual,
        )
    y0 = polished.x

    atlas = BifurcationAtlas(variant, {first.name: (first.lower, first.upper), second.name: (second.lower, second.upper)})

    def stop(y, t):
        return system.kind is BifurcationKind.HOPF and system.frequency(y) < BT_FREQUENCY

    halves = []
    for sign in (-1.0, 1.0):
        orientation = np.zeros_like(y0)
        orientation[-1] = sign
        halves.append(system.tracer.trace(y0, orientation, inside=system.inside, stop=stop))
    backward, forward = halves
    ys = list(reversed(backward.points)) + forward.points[1:]
    tangents = [-t for t in reversed(backward.tangents)] + forward.tangents[1:]

    d = system.d
    for k in range(len(ys) - 1):
        if point.kind is BifurcationKind.SADDLE_NODE and tangents[k][-2] * tangents[k + 1][-2] < 0:
            refined = system.tracer.bisect(ys[k], ys[k + 1], lambda y, t: t[-2], tangents[k])
            y_cusp, value = (refined[0], refined[2]) if refined else (ys[k + 1], float("nan"))
            state_cusp = MomentState.from_flat(y_cusp[:d], net.M)
            atlas.points.append(BifurcationPoint(
                BifurcationKind.CUSP, dict(zip((first.name, second.name), system.parameters(y_cusp))),
                state_cusp, float(value), admissible=is_admissible(variant, state_cusp, system.net_at(y_cusp)),
                low_confidence=refined is None,
            ))
    for half in halves:
        if half.termination == "stopped":
            y_bt = half.points[-1]
            state_bt = MomentState.from_flat(y_bt[:d], net.M)
            atlas.points.append(BifurcationPoint(
                BifurcationKind.BOGDANOV_TAKENS, dict(zip((first.name, second.name), system.parameters(y_bt))),
                state_bt, system.frequency(y_bt), admissible=is_admissible(variant, state_bt, system.net_at(y_bt)),
                low_confidence=True, frequency=system.frequency(y_bt),
            ))

    singular = second.is_inverse_size and any(
        h.termination == "left-domain" and system.parameters(h.points[-1])[1] < second.lower for h in halves
    )
    curve = Curve(
        point.kind,
        (first.name, second.name),
        np.array([system.parameters(y) for y in ys]),
        np.array([y[:d] for y in ys]),
        np.array([is_admissible(variant, MomentState.from_flat(y[:d], net.M), system.net_at(y)) for y in ys]),
        (backward.termination, forward.termination),
        singular,
        np.array([system.frequency(y) for y in ys]) if point.kind is BifurcationKind.HOPF else None,
        point.label,
    )
    atlas.curves.append(curve)
    atlas.assign_labels()
    logger.info(f"Codim-2 {point.kind.value} curve in ({first.name}, {second.name}): {len(ys)} points")
    return atlas


def inverse_size_axis(lower: float = INVERSE_SIZE_BOUNDS[0], upper: float = INVERSE_SIZE_BOUNDS[1]) -> ParameterAxis:
    return ParameterAxis("n", lower, upper)


def extrapolate_fold_to_zero(curve: Curve, n_max: float = 0.01, min_points: int = 6) -> float:
    """
    Limit of a fold curve's first parameter as the inverse size goes to zero.

    Near n = 0 the fold moves like n^(2/3), so the first parameter is fitted as
    I0 + a t^2 + b t^3 + c t^4 with t = n^(1/3) and I0 is returned.

    Raises:
        ConfigurationError: If fewer than min_points curve points have n <= n_max
    """
    n = curve.points[:, 1]
    mask = (n > 0) & (n <= n_max)
    if int(np.sum(mask)) < min_points:
        raise ConfigurationError(f"Only {int(np.sum(mask))} curve points with n <= {n_max}")
    t = np.cbrt(n[mask])
    design = np.column_stack([np.ones_like(t), t**2, t**3, t**4])
    coefficients = np.linalg.lstsq(design, curve.points[mask, 0], rcond=None)[0]
    return float(coefficients[0])


# ========== Activation homotopy ==========


@dataclass
class HomotopyResult:
    """
    Hopf curve followed from p = 0 towards a non-negative activation.

    Attributes:
        alpha: Fixed decay rate
        curve: The Hopf curve in (p, w)
        max_admissible_p: Largest p at an admissible curve point
        reaches_nonnegative_activation: An admissible Hopf point with p >= 1 exists
    """

    alpha: float
    curve: Curve
    max_admissible_p: float
    reaches_nonnegative_activation: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha,
            "curve": self.curve.to_dict(),
            "max_admissible_p": self.max_admissible_p,
            "reaches_nonnegative_activation": self.reaches_nonnegative_activation,
        }


def continue_hopf_homotopy(
    net: NetworkConfig,
    alpha: float,
    p_range: Tuple[float, float] = (-0.5, 1.5),
    w_range: Tuple[float, float] = (1e-3, 500.0),
    settings: Optional[ContinuationSettings] = None,
) -> HomotopyResult:
    """
    Follow the one-population BCC Hopf point at nu = 0 in (p, w) for fixed alpha.

    The start is p = 0, w = alpha / f'(I) where f(I) = 0. At p = 1 the
    activation f - p inf f is non-negative.
    """
    if net.M != 1:
        raise ConfigurationError("The activation homotopy is defined for one population")
    act = net.activations[0].with_p(0.0)
    I = float(net.inputs[0])
    slope = float(act.derivative(I, 1))
    if slope <= 0:
        raise ConfigurationError("f'(I) must be positive at the Hopf start")
    start = net.with_param("p", 0.0).with_param("alpha", alpha).with_param("w", alpha / slope)
    origin = MomentState([0.0], [0.0])
    eigenvalues = np.linalg.eigvals(jacobian(ModelVariant.BCC, origin, start))
    point = BifurcationPoint(
        BifurcationKind.HOPF, {"p": 0.0}, origin, 0.0, eigenvalues, frequency=float(np.max(eigenvalues.imag))
    )
    plane = (ParameterAxis("p", *p_range), ParameterAxis("w", *w_range))
    atlas = continue_codim2(ModelVariant.BCC, start, point, plane, settings)
    curve = atlas.curves[0]
    admissible_p = curve.points[curve.admissible, 0]
    max_p = float(np.max(admissible_p)) if admissible_p.size else float("nan")
    reaches = bool(np.any(admissible_p >= 1.0 - 1e-9))
    logger.info(f"Hopf homotopy at alpha={alpha}: max admissible p={max_p:.4g}, reaches p=1: {reaches}")
    return HomotopyResult(float(alpha), curve, max_p, reaches)


# ========== Hysteresis ==========


class HysteresisRunner(str, Enum):
    ODE = "ode"
    GILLESPIE = "gillespie"


@dataclass
class HysteresisResult:
    """
    Settled states of an up and a down parameter sweep.

    Attributes:
        parameter: Swept parameter
        values: Parameter values in ascending order
        up: Settled activities of the up sweep, one row per value
        down: Settled activities of the down sweep, aligned with values
        up_covariance: Settled covariances nu_ij - nu_i nu_j (stochastic runs)
        down_covariance: Same for the down sweep
        up_oscillating: Values at which the up sweep did not settle
        down_oscillating: Same for the down sweep
        threshold: Separation above which a value counts as bistable
    """

    parameter: str
    values: np.ndarray
    up: np.ndarray
    down: np.ndarray
    up_covariance: Optional[np.ndarray]
    down_covariance: Optional[np.ndarray]
    up_oscillating: np.ndarray
    down_oscillating: np.ndarray
    threshold: float

    @property
    def separation(self) -> np.ndarray:
        return np.max(np.abs(self.up - self.down), axis=1)

    @property
    def window(self) -> Optional[Tuple[float, float]]:
        """Smallest interval holding every bistable value, or None."""
        bistable = self.separation > self.threshold
        if not np.any(bistable):
            return None
        return float(self.values[bistable].min()), float(self.values[bistable].max())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "parameter": self.parameter,
            "values": self.values.tolist(),
            "up": self.up.tolist(),
            "down": self.down.tolist(),
            "up_oscillating": self.up_oscillating.tolist(),
            "down_oscillating": self.down_oscillating.tolist(),
            "threshold": self.threshold,
            "window": self.window,
        }


@dataclass
class _SettledPoint:
    mean: np.ndarray
    covariance: Optional[np.ndarray]
    oscillating: bool
    carry: Any


def _settle_ode(variant, net, carry: MomentState, dwell, settle_fraction, osc_tol) -> _SettledPoint:
    traj = integrate(variant, carry, net, dwell, n_points=max(201, int(dwell * 10)))
    tail = traj.tail(settle_fraction)
    oscillating = bool(np.max(np.ptp(tail.nu, axis=0)) > osc_tol)
    return _SettledPoint(tail.nu.mean(axis=0), None, oscillating, traj.final_state)


def _settle_gillespie(net, carry: np.ndarray, dwell, settle_fraction, osc_tol, seed, key, workers) -> _SettledPoint:
    stats = run_ensemble(net, carry, dwell, paths=carry.shape[0], seed=seed, stream_key=key, workers=workers)
    start = int(len(stats.times) * (1.0 - settle_fraction))
    mean = stats.mean[start:].mean(axis=0)
    covariance = stats.covariance[start:].mean(axis=0)
    oscillating = bool(np.max(np.ptp(stats.mean[start:], axis=0)) > osc_tol)
    return _SettledPoint(mean, covariance, oscillating, stats.final_counts)


def hysteresis_sweep(
    runner: Union[HysteresisRunner, str],
    net: NetworkConfig,
    parameter: str,
    values: Sequence[float],
    dwell: float = 100.0,
    direction: str = "both",
    variant: Union[ModelVariant, str] = ModelVariant.BCC,
    init: Optional[Union[MomentState, MarkovState, np.ndarray]] = None,
    paths: int = 100,
    seed: int = 0,
    threshold: float = 0.1,
    settle_fraction: float = 0.25,
    oscillation_tolerance: Optional[float] = None,
    workers: int = 1,
) -> HysteresisResult:
    """
    Step a parameter up then down, starting each value from the last state.

    Args:
        runner: "ode" integrates ``variant``; "gillespie" runs Markov ensembles
            where each path carries its own last state
        net: Network parameters
        parameter: Swept parameter name
        values: Parameter values (sorted internally)
        dwell: Time spent at each value
        direction: "up", "down" or "both" (down starts where up ended)
        variant: System for the ODE runner
        init: Initial state (zeros if omitted)
        paths: Ensemble size for the Gillespie runner
        seed: Base seed of the Gillespie streams
        threshold: Separation of up and down values marking bistability
        settle_fraction: Trailing fraction of each dwell averaged
        oscillation_tolerance: Range over the settled window flagging a
            non-settled point (default 1e-3 for ODEs, 0.02 for ensembles)
        workers: Threads for the Gillespie runner

    Returns:
        HysteresisResult (a one-directional sweep repeats itself in the other slot)
    """
    runner = HysteresisRunner(runner)
    variant = ModelVariant.parse(variant)
    if direction not in ("up", "down", "both"):
        raise ConfigurationError(f"direction must be up, down or both, got {direction!r}")
    grid = np.sort(np.asarray(values, dtype=float))
    if grid.size == 0:
        raise ConfigurationError("A hysteresis sweep needs at least one parameter value")
    osc_tol = oscillation_tolerance if oscillation_tolerance is not None else (
        1e-3 if runner is HysteresisRunner.ODE else 0.02
    )

    if runner is HysteresisRunner.ODE:
        carry: Any = init if isinstance(init, MomentState) else MomentState.zeros(net.M, variant)
    else:
        sizes = net.discrete_sizes
        if isinstance(init, MarkovState):
            start_counts = init.n
        elif init is None:
            start_counts = np.zeros(net.M, dtype=np.int64)
        else:
            start_counts = np.asarray(init, dtype=np.int64)
        carry = np.broadcast_to(np.minimum(start_counts, sizes), (paths, net.M)).astype(np.int64)

    def run(order: np.ndarray, leg: int, carry: Any) -> Tuple[List[_SettledPoint], Any]:
        settled = []
        for k, value in enumerate(order):
            net_p = net.with_param(parameter, value)
            if runner is HysteresisRunner.ODE:
                point = _settle_ode(variant, net_p, carry, dwell, settle_fraction, osc_tol)
            else:
                point = _settle_gillespie(net_p, carry, dwell, settle_fraction, osc_tol, seed, (leg, k), workers)
            if point.oscillating:
                logger.warning(f"Hysteresis point {parameter}={value:.6g} did not settle")
            settled.append(point)
            carry = point.carry
        return settled, carry

    up_points: List[_SettledPoint] = []
    down_points: List[_SettledPoint] = []
    if direction in ("up", "both"):
        up_points, carry = run(grid, 0, carry)
    if direction in ("down", "both"):
        down_points, carry = run(grid[::-1], 1, carry)
        down_points = down_points[::-1]
    up_points = up_points or down_points
    down_points = down_points or up_points

    def stack(points, attr):
        items = [getattr(p, attr) for p in points]
        return None if items[0] is None else np.array(items)

    result = HysteresisResult(
        parameter,
        grid,
        stack(up_points, "mean"),
        stack(down_points, "mean"),
        stack(up_points, "covariance"),
        stack(down_points, "covariance"),
        np.array([p.oscillating for p in up_points]),
        np.array([p.oscillating for p in down_points]),
        threshold,
    )
    logger.info(f"Hysteresis sweep over {parameter} ({runner.value}): window={result.window}")
    return result
