"""
Time stepping for the deterministic systems, Poincare sections, monodromy
integration and limit-cycle location by single shooting.

All integrations use the embedded Runge-Kutta 5(4) pair of scipy's solve_ivp.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from momentfield.config import SolverControls
from momentfield.exceptions import (
    ConfigurationError,
    CycleNotFoundError,
    EvaluationError,
    IntegrationError,
    OrbitClosureError,
)
from momentfield.models import ModelVariant, MomentState, NetworkConfig, coordinate_index
from momentfield.systems import flat_field, flat_jacobian

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_POINTS = 1001
SHOOTING_TOLERANCE = 1e-8
SHOOTING_ITERATIONS = 25
NEUTRAL_BAND = 1e-3
# The shooting flow is integrated this much tighter than the user controls
SHOOTING_TIGHTENING = 1e-2


@dataclass
class Trajectory:
    """
    A sampled solution of one of the deterministic systems.

    Attributes:
        times: Strictly increasing output times
        states: Flat states, shape (K, dimension)
        variant: System that produced the trajectory
        M: Number of populations
        crossing_times: Times of section crossings located during integration
        crossing_states: Flat states at those crossings
    """

    times: np.ndarray
    states: np.ndarray
    variant: ModelVariant
    M: int
    crossing_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    crossing_states: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    @property
    def nu(self) -> np.ndarray:
        return self.states[:, : self.M]

    @property
    def corr_packed(self) -> np.ndarray:
        return self.states[:, self.M:]

    def state_at(self, k: int) -> MomentState:
        return MomentState.from_flat(self.states[k], self.M)

    @property
    def final_state(self) -> MomentState:
        return self.state_at(-1)

    def tail(self, fraction: float) -> "Trajectory":
        """The last ``fraction`` of the samples."""
        start = int(len(self.times) * (1.0 - fraction))
        return Trajectory(self.times[start:], self.states[start:], self.variant, self.M)

    def __repr__(self) -> str:
        return f"Trajectory({self.variant.value}, {len(self.times)} samples, t_end={self.times[-1]:.6g})"


@dataclass(frozen=True)
class Section:
    """
    Poincare section {y[coordinate] = value}.

    Attributes:
        coordinate: Index into the flat state
        value: Section level
        direction: +1 upward crossings, -1 downward, 0 both
    """

    coordinate: int
    value: float
    direction: int = 1

    @classmethod
    def named(cls, name: str, value: float, M: int, direction: int = 1) -> "Section":
        """Section on a named coordinate such as ``nu_2`` or ``corr_11``."""
        return cls(coordinate_index(name, M), value, direction)

    def event(self) -> Callable[[float, np.ndarray], float]:
        def crossing(t, y):
            return y[self.coordinate] - self.value

        crossing.direction = self.direction
        return crossing


def _guarded(fun: Callable[[float, np.ndarray], np.ndarray], last: Dict[str, Any]):
    """Wrap a field so the last finite evaluation point is remembered."""

    def wrapped(t, y):
        value = fun(t, y)
        last["t"], last["y"] = t, np.array(y)
        return value

    return wrapped


def integrate(
    variant: ModelVariant,
    state0: MomentState,
    net: NetworkConfig,
    t_end: float,
    controls: Optional[SolverControls] = None,
    t_eval: Optional[Sequence[float]] = None,
    n_points: int = DEFAULT_OUTPUT_POINTS,
    section: Optional[Section] = None,
    backward: bool = False,
) -> Trajectory:
    """
    Integrate a system from state0 over [0, t_end].

    Args:
        variant: Which system
        state0: Initial state; its correlation block is added or dropped to fit
        net: Network parameters
        t_end: Final time (> 0)
        controls: Integrator tolerances
        t_eval: Output grid (default: n_points uniform points)
        n_points: Size of the default output grid
        section: Optional Poincare section located during integration
        backward: Integrate the time-reversed field

    Returns:
        Trajectory on the output grid

    Raises:
        IntegrationError: If the step size underflows or the state blows up
    """
    if not t_end > 0:
        raise ConfigurationError(f"t_end must be positive, got {t_end}")
    variant = ModelVariant.parse(variant)
    controls = controls or SolverControls()
    y0 = state0.for_variant(variant).flat
    forward = flat_field(variant, net)
    fun = forward if not backward else (lambda t, y: -forward(t, y))
    last: Dict[str, Any] = {"t": 0.0, "y": y0}
    times = np.linspace(0.0, t_end, n_points) if t_eval is None else np.asarray(t_eval, dtype=float)

    logger.debug(f"Integrating {variant.value} to t={t_end} (rtol={controls.rtol}, atol={controls.atol})")
    try:
        sol = solve_ivp(
            _guarded(fun, last),
            (0.0, t_end),
            y0,
            method="RK45",
            t_eval=times,
            rtol=controls.rtol,
            atol=controls.atol,
            max_step=controls.max_step,
            first_step=controls.first_step,
            events=section.event() if section is not None else None,
        )
    except EvaluationError as e:
        raise IntegrationError(f"State became non-finite: {e}", last["t"], last["y"]) from e
    if sol.status < 0:
        raise IntegrationError(f"Integration failed: {sol.message}", last["t"], last["y"])

    trajectory = Trajectory(sol.t, sol.y.T.copy(), variant, net.M)
    if section is not None and sol.t_events:
        trajectory.crossing_times = sol.t_events[0]
        trajectory.crossing_states = sol.y_events[0]
    return trajectory


# ========== Poincare sections ==========


@dataclass
class SectionCrossings:
    """Interpolated crossings of a section by a sampled trajectory."""

    times: np.ndarray
    states: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    def spread(self, last: Optional[int] = None) -> float:
        """Largest coordinate range over the (last) crossing states."""
        states = self.states if last is None else self.states[-last:]
        if len(states) == 0:
            return 0.0
        return float(np.max(np.ptp(states, axis=0)))


def poincare_map(traj: Trajectory, section: Section) -> SectionCrossings:
    """
    Crossings of a sampled trajectory through a section, by linear interpolation.

    Returns:
        SectionCrossings (empty when the trajectory never crosses)
    """
    g = traj.states[:, section.coordinate] - section.value
    before, after = g[:-1], g[1:]
    if section.direction > 0:
        hits = np.nonzero((before < 0) & (after >= 0))[0]
    elif section.direction < 0:
        hits = np.nonzero((before > 0) & (after <= 0))[0]
    else:
        hits = np.nonzero(np.sign(before) != np.sign(after))[0]
    if hits.size == 0:
        return SectionCrossings(np.zeros(0), np.zeros((0, traj.states.shape[1])))
    theta = before[hits] / (before[hits] - after[hits])
    times = traj.times[hits] + theta * (traj.times[hits + 1] - traj.times[hits])
    states = traj.states[hits] + theta[:, None] * (traj.states[hits + 1] - traj.states[hits])
    return SectionCrossings(times, states)


def estimate_period(traj: Trajectory, coordinate: Optional[int] = None, returns: int = 5) -> float:
    """
    Period of a settled oscillation from upward crossings of its mean level.

    Args:
        traj: Trajectory whose second half is assumed settled
        coordinate: Coordinate to use (default: the one with the largest range)
        returns: Number of last return times averaged

    Raises:
        CycleNotFoundError: If fewer than two crossings are found
    """
    settled = traj.tail(0.5)
    if coordinate is None:
        coordinate = int(np.argmax(np.ptp(settled.states, axis=0)))
    level = float(np.mean(settled.states[:, coordinate]))
    crossings = poincare_map(settled, Section(coordinate, level, 1))
    if len(crossings) < 2:
        raise CycleNotFoundError("No oscillation found in the settled trajectory", 0, 0.0)
    return float(np.mean(np.diff(crossings.times)[-returns:]))


# ========== Monodromy ==========


def flow_and_monodromy(
    vector_field: Optional[Callable[[float, np.ndarray], np.ndarray]],
    linearization: Callable[[float, np.ndarray], np.ndarray],
    x0: np.ndarray,
    T: float,
    controls: SolverControls,
):
    d = x0.size
    M = np.atleast_2d(linearization(0.0, x0)).shape[0]

    def augmented(t, y):
        x = y[:d]
        phi = y[d:].reshape(M, M)
        dx = vector_field(t, x) if vector_field is not None else np.zeros(0)
        return np.concatenate([dx, (np.atleast_2d(linearization(t, x)) @ phi).ravel()])

    y0 = np.concatenate([x0, np.eye(M).ravel()])
    try:
        sol = solve_ivp(
            augmented, (0.0, T), y0, method="RK45", rtol=controls.rtol, atol=controls.atol,
            max_step=controls.max_step,
        )
    except EvaluationError as e:
        raise IntegrationError(f"Monodromy integration hit a non-finite state: {e}") from e
    if sol.status < 0:
        raise IntegrationError(f"Monodromy integration failed: {sol.message}", sol.t[-1], sol.y[:d, -1])
    end = sol.y[:, -1]
    return end[:d], end[d:].reshape(M, M)


def resolvent(
    linearization: Callable[[float, np.ndarray], np.ndarray],
    period: float,
    state0: Optional[np.ndarray] = None,
    vector_field: Optional[Callable[[float, np.ndarray], np.ndarray]] = None,
    closure_tol: Optional[float] = None,
    controls: Optional[SolverControls] = None,
) -> np.ndarray:
    """
    Resolvent Phi(T) of Phi' = A(t, x(t)) Phi, Phi(0) = I.

    Args:
        linearization: A(t, x); x is empty unless a vector field is given
        period: Integration horizon T
        state0: Start of the orbit integrated alongside
        vector_field: State equation f(t, x) of the orbit
        closure_tol: If set, the orbit must return to state0 within this tolerance
        controls: Integrator tolerances

    Returns:
        Phi(T)

    Raises:
        OrbitClosureError: If the orbit misses its start by more than closure_tol
    """
    controls = controls or SolverControls()
    x0 = np.zeros(0) if vector_field is None else np.asarray(state0, dtype=float)
    x_end, phi = flow_and_monodromy(vector_field, linearization, x0, period, controls)
    if vector_field is not None and closure_tol is not None:
        mismatch = float(np.max(np.abs(x_end - x0)))
        if mismatch > closure_tol:
            raise OrbitClosureError(mismatch, closure_tol)
    return phi


def monodromy(
    variant: ModelVariant,
    state: MomentState,
    period: float,
    net: NetworkConfig,
    controls: Optional[SolverControls] = None,
    closure_tol: Optional[float] = 1e-6,
) -> np.ndarray:
    """Monodromy matrix of a system along the orbit through ``state``."""
    variant = ModelVariant.parse(variant)
    fun = flat_field(variant, net)
    jac = flat_jacobian(variant, net)
    return resolvent(
        lambda t, x: jac(x),
        period,
        state0=state.for_variant(variant).flat,
        vector_field=fun,
        closure_tol=closure_tol,
        controls=controls or SolverControls().scaled(SHOOTING_TIGHTENING),
    )


# ========== Limit cycles ==========


class CycleStability(str, Enum):
    STABLE = "stable"
    NEUTRAL = "neutral"
    UNSTABLE = "unstable"


def nontrivial_multipliers(multipliers: Sequence[complex]) -> np.ndarray:
    """All multipliers except the one closest to 1."""
    multipliers = np.asarray(multipliers, dtype=complex)
    if multipliers.size == 0:
        return multipliers
    return np.delete(multipliers, int(np.argmin(np.abs(multipliers - 1.0))))


def classify_cycle(multipliers: Sequence[complex], band: float = NEUTRAL_BAND) -> CycleStability:
    others = np.abs(nontrivial_multipliers(multipliers))
    if np.any(others > 1.0 + band):
        return CycleStability.UNSTABLE
    if np.all(others < 1.0 - band):
        return CycleStability.STABLE
    return CycleStability.NEUTRAL


@dataclass
class LimitCycle:
    """
    A periodic orbit located by shooting.

    Attributes:
        variant: System the cycle belongs to
        period: Period T
        anchor: State on the cycle where the phase is pinned
        multipliers: Floquet multipliers (eigenvalues of the monodromy matrix)
        stability: Classification from the non-trivial multipliers
        iterations: Newton iterations used
        residual: Final closure residual |x(T) - x(0)|
    """

    variant: ModelVariant
    period: float
    anchor: MomentState
    multipliers: np.ndarray
    stability: CycleStability
    iterations: int = 0
    residual: float = 0.0

    @property
    def trivial_multiplier_error(self) -> float:
        return float(np.min(np.abs(self.multipliers - 1.0)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variant": self.variant.value,
            "period": self.period,
            "anchor": self.anchor.to_dict(),
            "multipliers": [[z.real, z.imag] for z in self.multipliers],
            "stability": self.stability.value,
            "iterations": self.iterations,
            "residual": self.residual,
        }

    def __repr__(self) -> str:
        return f"LimitCycle({self.variant.value}, T={self.period:.6g}, {self.stability.value})"


def find_cycle(
    variant: ModelVariant,
    guess: MomentState,
    period_guess: float,
    net: NetworkConfig,
    controls: Optional[SolverControls] = None,
    max_iter: int = SHOOTING_ITERATIONS,
    tol: float = SHOOTING_TOLERANCE,
) -> LimitCycle:
    """
    Locate a periodic orbit by single shooting.

    The unknowns are the start point x and the period T; the equations are
    x(T) - x = 0 and the anchor-hyperplane phase condition f(a) . (x - a) = 0,
    with a the initial guess.

    Args:
        variant: Which system
        guess: A point near the cycle (typically the end of a settled transient)
        period_guess: Estimated period
        net: Network parameters
        controls: Integrator tolerances for the shooting flow
        max_iter: Newton budget
        tol: Closure tolerance on |x(T) - x|

    Returns:
        LimitCycle with Floquet multipliers

    Raises:
        CycleNotFoundError: If the guess is an equilibrium or Newton fails
    """
    variant = ModelVariant.parse(variant)
    controls = controls or SolverControls().scaled(SHOOTING_TIGHTENING)
    fun = flat_field(variant, net)
    jac = flat_jacobian(variant, net)
    x = guess.for_variant(variant).flat.copy()
    T = float(period_guess)
    anchor = x.copy()
    normal = fun(0.0, anchor)
    speed = float(np.linalg.norm(normal))
    if speed < 1e-9:
        raise CycleNotFoundError("The guess is an equilibrium", 0, speed)
    normal = normal / speed
    d = x.size

    residual = float("inf")
    for iteration in range(1, max_iter + 1):
        x_end, phi = flow_and_monodromy(fun, lambda t, z: jac(z), x, T, controls)
        mismatch = x_end - x
        residual = float(np.max(np.abs(mismatch)))
        phase = float(normal @ (x - anchor))
        logger.debug(f"Shooting iteration {iteration}: residual={residual:.3e}, T={T:.8g}")
        if residual < tol and abs(phase) < tol:
            break
        system = np.zeros((d + 1, d + 1))
        system[:d, :d] = phi - np.eye(d)
        system[:d, d] = fun(0.0, x_end)
        system[d, :d] = normal
        step = np.linalg.lstsq(system, -np.append(mismatch, phase), rcond=None)[0]
        # keep the period update within a quarter period
        scale = min(1.0, 0.25 * T / max(abs(step[d]), 1e-300))
        x = x + scale * step[:d]
        T = T + scale * step[d]
        if not np.all(np.isfinite(x)) or T <= 0:
            raise CycleNotFoundError("Shooting Newton diverged", iteration, residual)
    else:
        raise CycleNotFoundError("Shooting Newton did not converge", max_iter, residual)

    if float(np.linalg.norm(fun(0.0, x))) < 1e-7:
        raise CycleNotFoundError("Shooting collapsed onto an equilibrium", iteration, residual)

    multipliers = np.linalg.eigvals(phi)
    cycle = LimitCycle(
        variant, T, MomentState.from_flat(x, net.M), multipliers, classify_cycle(multipliers), iteration, residual
    )
    if cycle.trivial_multiplier_error > 1e-4:
        logger.warning(f"Trivial multiplier off by {cycle.trivial_multiplier_error:.2e} for {cycle}")
    logger.info(f"Found {cycle}")
    return cycle


def cycle_from_transient(
    variant: ModelVariant,
    state0: MomentState,
    net: NetworkConfig,
    transient: float = 200.0,
    controls: Optional[SolverControls] = None,
) -> LimitCycle:
    """Integrate a transient, estimate the period and polish the cycle by shooting."""
    traj = integrate(variant, state0, net, transient, controls, n_points=max(2001, int(transient * 20)))
    period = estimate_period(traj)
    return find_cycle(variant, traj.final_state, period, net)


def cycle_multipliers(
    variant: ModelVariant,
    cycle: LimitCycle,
    net: NetworkConfig,
    controls: Optional[SolverControls] = None,
) -> np.ndarray:
    """
    Floquet multipliers of a cycle viewed as an orbit of another system.

    Typical use: a Wilson-Cowan cycle embedded with zero correlations in the
    infinite-size system.
    """
    phi = monodromy(variant, cycle.anchor, cycle.period, net, controls, closure_tol=1e-6)
    return np.linalg.eigvals(phi)
