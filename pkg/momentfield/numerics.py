"""
Shared numerical kernels: finite-difference Jacobians, damped Newton and a
pseudo-arclength curve tracer with secant bisection for event refinement.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from momentfield.exceptions import EvaluationError

logger = logging.getLogger(__name__)

SQRT_EPS = float(np.sqrt(np.finfo(float).eps))

DEFAULT_NEWTON_TOL = 1e-10
DEFAULT_NEWTON_ITERATIONS = 50
ARMIJO_CONSTANT = 1e-4
MIN_DAMPING = 1.0 / 1024

Vector = np.ndarray
VectorFunction = Callable[[Vector], Vector]


def fd_jacobian(fun: VectorFunction, x: Vector, rel_step: float = SQRT_EPS) -> np.ndarray:
    """
    Central-difference Jacobian with step rel_step * max(1, |x_k|) per component.

    Args:
        fun: Map from R^n to R^m
        x: Evaluation point
        rel_step: Relative step

    Returns:
        m x n matrix
    """
    x = np.asarray(x, dtype=float)
    steps = rel_step * np.maximum(1.0, np.abs(x))
    columns = []
    for k, h in enumerate(steps):
        shift = np.zeros_like(x)
        shift[k] = h
        columns.append((np.asarray(fun(x + shift)) - np.asarray(fun(x - shift))) / (2.0 * h))
    return np.column_stack(columns)


@dataclass
class NewtonResult:
    """
    Outcome of a Newton solve.

    Attributes:
        x: Final iterate
        converged: True if the residual norm dropped below the tolerance
        iterations: Newton steps taken
        residual: Final max-norm of the residual
    """

    x: Vector
    converged: bool
    iterations: int
    residual: float


def _safe_eval(fun: VectorFunction, x: Vector) -> Optional[Vector]:
    try:
        value = np.asarray(fun(x), dtype=float)
    except (EvaluationError, FloatingPointError, OverflowError):
        return None
    return value if np.all(np.isfinite(value)) else None


def newton(
    fun: VectorFunction,
    x0: Vector,
    jacobian: Optional[Callable[[Vector], np.ndarray]] = None,
    tol: float = DEFAULT_NEWTON_TOL,
    max_iter: int = DEFAULT_NEWTON_ITERATIONS,
) -> NewtonResult:
    """
    Damped Newton iteration with Armijo backtracking on 1/2 |F|^2.

    Non-square or singular Jacobians are handled through least squares, which
    gives the minimum-norm Gauss-Newton step.
    """
    x = np.asarray(x0, dtype=float).copy()
    F = _safe_eval(fun, x)
    if F is None:
        return NewtonResult(x, False, 0, float("inf"))
    residual = float(np.max(np.abs(F))) if F.size else 0.0

    for iteration in range(max_iter):
        if residual < tol:
            return NewtonResult(x, True, iteration, residual)
        J = jacobian(x) if jacobian is not None else fd_jacobian(fun, x)
        try:
            if J.shape[0] == J.shape[1]:
                step = np.linalg.solve(J, -F)
            else:
                step = np.linalg.lstsq(J, -F, rcond=None)[0]
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -F, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            return NewtonResult(x, False, iteration, residual)

        merit = 0.5 * float(F @ F)
        damping = 1.0
        while True:
            trial = x + damping * step
            F_trial = _safe_eval(fun, trial)
            if F_trial is not None and 0.5 * float(F_trial @ F_trial) <= (1.0 - 2.0 * ARMIJO_CONSTANT * damping) * merit:
                break
            damping *= 0.5
            if damping < MIN_DAMPING:
                logger.debug(f"Newton line search stalled at residual {residual:.3e}")
                return NewtonResult(x, False, iteration, residual)
        x, F = trial, F_trial
        residual = float(np.max(np.abs(F)))

    return NewtonResult(x, residual < tol, max_iter, residual)


def null_vector(matrix: np.ndarray, orientation: Optional[Vector] = None) -> Vector:
    """Unit vector spanning the (numerical) kernel of a k x (k+1) matrix."""
    _, _, vt = np.linalg.svd(matrix)
    t = vt[-1]
    if orientation is not None and float(t @ orientation) < 0:
        t = -t
    return t / np.linalg.norm(t)


# ========== Pseudo-arclength continuation ==========


@dataclass
class ContinuationSettings:
    """
    Step control for the curve tracer.

    Attributes:
        initial_step: First arclength step
        min_step: Smallest step before the tracer gives up
        max_step: Largest step
        max_points: Hard cap on accepted points
        tol: Corrector tolerance on the residual max-norm
        max_corrector_iterations: Newton budget per corrector
        fast_iterations: Corrector counts at or below this double the step
        slow_iterations: Corrector counts at or above this halve the step
    """

    initial_step: float = 1e-2
    min_step: float = 1e-7
    max_step: float = 0.1
    max_points: int = 3000
    tol: float = 1e-10
    max_corrector_iterations: int = 12
    fast_iterations: int = 3
    slow_iterations: int = 8


@dataclass
class CurveTrace:
    """
    A traced solution curve of G(y) = 0, G: R^(k+1) -> R^k.

    Attributes:
        points: Accepted points, arclength ordered
        tangents: Unit tangents at the points, consistently oriented
        termination: Why tracing stopped ("max-points", "left-domain",
            "step-underflow" or "stopped")
    """

    points: List[Vector] = field(default_factory=list)
    tangents: List[Vector] = field(default_factory=list)
    termination: str = "max-points"

    @property
    def truncated(self) -> bool:
        return self.termination == "left-domain"


class CurveTracer:
    """
    Pseudo-arclength tracer for an underdetermined system G(y) = 0.

    Example:
        tracer = CurveTracer(residual, settings=ContinuationSettings())
        trace = tracer.trace(y0, orientation=np.eye(len(y0))[-1])
    """

    def __init__(
        self,
        residual: VectorFunction,
        settings: Optional[ContinuationSettings] = None,
        jacobian: Optional[Callable[[Vector], np.ndarray]] = None,
    ):
        self.residual = residual
        self.settings = settings or ContinuationSettings()
        self._jacobian = jacobian

    def jacobian(self, y: Vector) -> np.ndarray:
        if self._jacobian is not None:
            return self._jacobian(y)
        return fd_jacobian(self.residual, y)

    def tangent(self, y: Vector, orientation: Optional[Vector] = None) -> Vector:
        return null_vector(self.jacobian(y), orientation)

    def correct(self, y_guess: Vector, normal: Vector) -> NewtonResult:
        """Newton on [G(y); normal . (y - y_guess)] = 0."""
        normal = np.asarray(normal, dtype=float)

        def bordered(y):
            return np.append(self.residual(y), normal @ (y - y_guess))

        def bordered_jacobian(y):
            return np.vstack([self.jacobian(y), normal])

        return newton(
            bordered,
            y_guess,
            jacobian=bordered_jacobian,
            tol=self.settings.tol,
            max_iter=self.settings.max_corrector_iterations,
        )

    def trace(
        self,
        y0: Vector,
        orientation: Optional[Vector] = None,
        inside: Optional[Callable[[Vector], bool]] = None,
        stop: Optional[Callable[[Vector, Vector], bool]] = None,
    ) -> CurveTrace:
        """
        Follow the curve from a point that already solves G = 0.

        Args:
            y0: Starting solution
            orientation: The initial tangent is flipped to have a positive dot
                product with this vector
            inside: Domain predicate; the first point outside ends the trace
                (it is kept so the exit is visible)
            stop: Called with (point, tangent) after every accepted point

        Returns:
            CurveTrace
        """
        s = self.settings
        y = np.asarray(y0, dtype=float)
        t = self.tangent(y, orientation)
        trace = CurveTrace([y], [t])
        h = s.initial_step

        while len(trace.points) < s.max_points:
            prediction = y + h * t
            corrected = self.correct(prediction, t)
            if corrected.converged:
                y_new = corrected.x
                t_new = self.tangent(y_new, t)
                # a sharp turn means the corrector jumped to another part of the curve
                if float(t @ t_new) < 0.8 and h > s.min_step:
                    corrected.converged = False
            if not corrected.converged:
                h *= 0.5
                if h < s.min_step:
                    trace.termination = "step-underflow"
                    logger.debug(f"Curve tracer step underflow after {len(trace.points)} points")
                    break
                continue

            trace.points.append(y_new)
            trace.tangents.append(t_new)
            y, t = y_new, t_new
            if inside is not None and not inside(y):
                trace.termination = "left-domain"
                break
            if stop is not None and stop(y, t):
                trace.termination = "stopped"
                break
            if corrected.iterations <= s.fast_iterations:
                h = min(2.0 * h, s.max_step)
            elif corrected.iterations >= s.slow_iterations:
                h = max(0.5 * h, s.min_step)

        return trace

    def bisect(
        self,
        y_a: Vector,
        y_b: Vector,
        test: Callable[[Vector, Vector], float],
        orientation: Vector,
        tol: float = 1e-10,
        max_iter: int = 60,
    ) -> Optional[tuple]:
        """
        Locate a sign change of test(y, tangent) between two curve points.

        Points between y_a and y_b are produced by correcting secant
        interpolants back onto the curve.

        Returns:
            (point, tangent, test value) at the refined location, or None if the
            corrector fails
        """
        chord = y_b - y_a
        length = float(np.linalg.norm(chord))
        normal = chord / length
        g_a = test(y_a, self.tangent(y_a, orientation))
        lo, hi = 0.0, 1.0
        best = None
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            corrected = self.correct(y_a + mid * chord, normal)
            if not corrected.converged:
                return best
            t_mid = self.tangent(corrected.x, orientation)
            g_mid = test(corrected.x, t_mid)
            best = (corrected.x, t_mid, g_mid)
            if np.sign(g_mid) == np.sign(g_a):
                lo, g_a = mid, g_mid
            else:
                hi = mid
            if (hi - lo) * length < tol:
                break
        return best
