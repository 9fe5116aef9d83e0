"""
Equilibria of the deterministic systems: multi-start location, Jacobian
spectra, stability classes, the one-population closed forms and the
Hopf genericity check of the one-population BCC system at zero activity.
"""
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from momentfield.exceptions import ConfigurationError, NotAHopfCandidateError
from momentfield.models import (
    ModelVariant,
    MomentState,
    NetworkConfig,
    packed_size,
)
from momentfield.numerics import fd_jacobian, newton
from momentfield.systems import flat_field, flat_jacobian

logger = logging.getLogger(__name__)

NEUTRAL_BAND = 1e-8
RESIDUAL_TOL = 1e-10
DEDUP_DISTANCE = 1e-6
PSD_TOL = 1e-8
OMEGA_REL_TOL = 1e-6


class StabilityClass(str, Enum):
    STABLE = "stable"
    SADDLE = "saddle"
    UNSTABLE = "unstable"
    CENTER_CANDIDATE = "center-candidate"


def classify_eigenvalues(eigenvalues: Sequence[complex], band: float = NEUTRAL_BAND) -> StabilityClass:
    """
    Stability class from the sign pattern of the real parts.

    Real parts within ``band`` of zero count as neutral.
    """
    real = np.real(np.asarray(eigenvalues, dtype=complex))
    positive = np.any(real > band)
    negative = np.any(real < -band)
    if positive and negative:
        return StabilityClass.SADDLE
    if positive:
        return StabilityClass.UNSTABLE
    if np.all(real < -band):
        return StabilityClass.STABLE
    return StabilityClass.CENTER_CANDIDATE


def jacobian(variant: ModelVariant, state: MomentState, net: NetworkConfig) -> np.ndarray:
    """Central finite-difference Jacobian of the flat vector field."""
    variant = ModelVariant.parse(variant)
    return flat_jacobian(variant, net, analytic=False)(state.for_variant(variant).flat)


def is_admissible(variant: ModelVariant, state: MomentState, net: NetworkConfig, tol: float = 1e-9) -> bool:
    """
    Activities in [0, 1] and a positive semidefinite correlation matrix.

    The BCC cumulant is turned into the correlation c + diag(nu / N) first.
    """
    variant = ModelVariant.parse(variant)
    if np.any(state.nu < -tol) or np.any(state.nu > 1.0 + tol):
        return False
    if not variant.has_correlations or not state.has_correlations:
        return True
    corr = state.corr
    if variant is ModelVariant.BCC:
        corr = corr + np.diag(state.nu * net.inverse_sizes)
    return bool(np.min(np.linalg.eigvalsh(corr)) >= -PSD_TOL)


@dataclass
class FixedPoint:
    """
    An equilibrium with its spectrum.

    Attributes:
        state: The equilibrium
        variant: System it solves
        eigenvalues: Jacobian eigenvalues
        stability: Class from the eigenvalue real parts
        admissible: Activities in [0, 1] and PSD correlations
        residual: max-norm of the vector field at the state
    """

    state: MomentState
    variant: ModelVariant
    eigenvalues: np.ndarray
    stability: StabilityClass
    admissible: bool
    residual: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variant": self.variant.value,
            "state": self.state.to_dict(),
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "class": self.stability.value,
            "admissible": self.admissible,
            "residual": self.residual,
        }

    def __repr__(self) -> str:
        return f"FixedPoint({self.variant.value}, nu={np.round(self.state.nu, 6).tolist()}, {self.stability.value})"


def classify(fp: FixedPoint) -> StabilityClass:
    return classify_eigenvalues(fp.eigenvalues)


def describe_fixed_point(variant: ModelVariant, state: MomentState, net: NetworkConfig) -> FixedPoint:
    """Build a FixedPoint record (spectrum, class, admissibility) for a solved state."""
    variant = ModelVariant.parse(variant)
    state = state.for_variant(variant)
    residual = float(np.max(np.abs(flat_field(variant, net)(0.0, state.flat))))
    eigenvalues = np.linalg.eigvals(jacobian(variant, state, net))
    return FixedPoint(
        state, variant, eigenvalues, classify_eigenvalues(eigenvalues),
        is_admissible(variant, state, net), residual,
    )


@dataclass(frozen=True)
class SearchGrid:
    """
    Multi-start grid for equilibrium search.

    Attributes:
        nu_bounds: Box for every activity coordinate
        nu_points: Grid points per activity axis
        corr_bounds: Box for every correlation coordinate
        corr_points: Grid points per correlation axis
        max_starts: Above this the grid is replaced by seeded uniform samples
        seed: Seed of that sampling
    """

    nu_bounds: Tuple[float, float] = (-0.5, 1.5)
    nu_points: int = 7
    corr_bounds: Tuple[float, float] = (-0.1, 0.1)
    corr_points: int = 3
    max_starts: int = 5000
    seed: int = 0

    def starts(self, variant: ModelVariant, M: int) -> np.ndarray:
        n_corr = packed_size(M) if ModelVariant.parse(variant).has_correlations else 0
        axes = [np.linspace(*self.nu_bounds, self.nu_points)] * M
        axes += [np.linspace(*self.corr_bounds, self.corr_points)] * n_corr
        total = math.prod(len(a) for a in axes)
        if total <= self.max_starts:
            return np.array(list(itertools.product(*axes)))
        logger.debug(f"Grid of {total} starts replaced by {self.max_starts} samples")
        rng = np.random.default_rng(self.seed)
        low = np.array([self.nu_bounds[0]] * M + [self.corr_bounds[0]] * n_corr)
        high = np.array([self.nu_bounds[1]] * M + [self.corr_bounds[1]] * n_corr)
        return low + (high - low) * rng.random((self.max_starts, M + n_corr))


def deduplicate(points: Sequence[np.ndarray], distance: float = DEDUP_DISTANCE) -> List[np.ndarray]:
    unique: List[np.ndarray] = []
    for x in points:
        if all(np.max(np.abs(x - u)) > distance for u in unique):
            unique.append(x)
    return sorted(unique, key=lambda u: tuple(np.round(u, 12)))


def find_fixed_points(
    variant: ModelVariant,
    net: NetworkConfig,
    search: Optional[SearchGrid] = None,
    workers: int = 1,
) -> List[FixedPoint]:
    """
    Locate equilibria by damped Newton from every grid start.

    Args:
        variant: Which system
        net: Network parameters
        search: Start grid (defaults cover nu in [-0.5, 1.5]^M)
        workers: Threads sharing the starts

    Returns:
        Deduplicated equilibria sorted by coordinates (possibly empty)
    """
    variant = ModelVariant.parse(variant)
    search = search or SearchGrid()
    fun = flat_field(variant, net)
    jac = flat_jacobian(variant, net)
    starts = search.starts(variant, net.M)

    def solve_block(block: np.ndarray) -> List[np.ndarray]:
        roots = []
        for x0 in block:
            result = newton(lambda y: fun(0.0, y), x0, jacobian=jac, tol=RESIDUAL_TOL)
            if result.converged:
                roots.append(result.x)
        return roots

    blocks = np.array_split(starts, max(1, workers * 4))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            found = list(executor.map(solve_block, blocks))
    else:
        found = [solve_block(b) for b in blocks]
    roots = deduplicate([x for block in found for x in block])

    points = [describe_fixed_point(variant, MomentState.from_flat(x, net.M), net) for x in roots]
    logger.info(f"Found {len(points)} {variant.value} fixed points from {len(starts)} starts")
    return points


# ========== One-population closed forms ==========


def _single(net: NetworkConfig) -> Tuple[float, float, float]:
    if net.M != 1:
        raise ConfigurationError("This closed form applies to one population only")
    return float(net.alpha[0]), float(net.w[0, 0]), float(net.inputs[0])


def zero_correlation_jacobian(net: NetworkConfig, nu: float) -> np.ndarray:
    """[[lambda, f''w^2/2], [0, 2 lambda]] of the infinite-size system at (nu, 0)."""
    alpha, w, I = _single(net)
    act = net.activations[0]
    s = w * nu + I
    lam = -alpha + w * float(act.derivative(s, 1))
    return np.array([[lam, 0.5 * float(act.derivative(s, 2)) * w * w], [0.0, 2.0 * lam]])


def correlated_fixed_points(net: NetworkConfig, s_range: Tuple[float, float] = (-40.0, 40.0)) -> List[MomentState]:
    """
    Infinite-size equilibria with non-zero correlation for one population.

    They sit on w f'(s*) = alpha with nu* = (s* - I)/w and
    Delta* = 2 (alpha nu* - f(s*)) / (w^2 f''(s*)).
    """
    alpha, w, I = _single(net)
    act = net.activations[0]
    if w == 0:
        return []
    grid = np.linspace(*s_range, 8001)
    gap = w * act.derivative(grid, 1) - alpha
    states = []
    for k in np.nonzero(np.sign(gap[:-1]) != np.sign(gap[1:]))[0]:
        s_star = brentq(lambda s: w * float(act.derivative(s, 1)) - alpha, grid[k], grid[k + 1], xtol=1e-14)
        curvature = float(act.derivative(s_star, 2))
        if curvature == 0.0:
            continue
        nu_star = (s_star - I) / w
        delta = 2.0 * (alpha * nu_star - float(act(s_star))) / (w * w * curvature)
        states.append(MomentState([nu_star], [delta]))
    return states


def correlated_jacobian(net: NetworkConfig, state: MomentState) -> np.ndarray:
    """[[f'''w^3 D / 2, f''w^2 / 2], [2 f''w^2 D, 0]] at a correlated one-population point."""
    _, w, I = _single(net)
    act = net.activations[0]
    s = w * float(state.nu[0]) + I
    delta = float(state.corr_packed[0])
    f2, f3 = float(act.derivative(s, 2)), float(act.derivative(s, 3))
    return np.array([[0.5 * f3 * w**3 * delta, 0.5 * f2 * w * w], [2.0 * f2 * w * w * delta, 0.0]])


# ========== Hopf genericity ==========


class Criticality(str, Enum):
    SUPERCRITICAL = "super"
    SUBCRITICAL = "sub"
    DEGENERATE = "degenerate"


@dataclass
class HopfReport:
    """
    Genericity data of the zero-activity Hopf point of one BCC population.

    The closed form uses eigenvectors that are not normalised to <p, q> = 1, so
    its magnitude is not comparable with ``l1``; only its sign is checked.

    Attributes:
        omega0: Closed-form frequency sqrt(-f' f'' w^3 / N)
        omega0_numeric: Imaginary part of the computed eigenvalue pair
        transversality: d Re(mu) / d alpha
        l1: First Lyapunov coefficient from finite-difference multilinear forms
        l1_analytic: Same coefficient from the exact multilinear forms
        reduced_indicator: f''' f' (1 + 1/omega0) + f''^2 (2/omega0 - 14/3); its sign
            predicts the criticality
        l1_closed_form: w^2 N / (2 omega0 f'^2) times the reduced indicator
        criticality: super iff l1 < 0
    """

    omega0: float
    omega0_numeric: float
    transversality: float
    l1: float
    l1_analytic: float
    reduced_indicator: float
    l1_closed_form: float
    criticality: Criticality

    @property
    def omega_agrees(self) -> bool:
        return abs(self.omega0_numeric - self.omega0) <= OMEGA_REL_TOL * abs(self.omega0)

    @property
    def signs_agree(self) -> bool:
        return bool(np.sign(self.l1) == np.sign(self.l1_closed_form) == np.sign(self.l1_analytic))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "omega0": self.omega0,
            "omega0_numeric": self.omega0_numeric,
            "transversality": self.transversality,
            "l1": self.l1,
            "l1_analytic": self.l1_analytic,
            "reduced_indicator": self.reduced_indicator,
            "l1_closed_form": self.l1_closed_form,
            "criticality": self.criticality.value,
        }


Bilinear = Callable[[np.ndarray, np.ndarray], np.ndarray]
Trilinear = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def _complex_bilinear(real_form: Bilinear) -> Bilinear:
    def form(u, v):
        u, v = np.asarray(u, dtype=complex), np.asarray(v, dtype=complex)
        parts = ((u.real, 1.0), (u.imag, 1j))
        total = 0j
        for (a, ca), (b, cb) in itertools.product(parts, ((v.real, 1.0), (v.imag, 1j))):
            total = total + ca * cb * real_form(a, b)
        return total

    return form


def _complex_trilinear(real_form: Trilinear) -> Trilinear:
    def form(u, v, z):
        pieces = [
            ((np.real(x), 1.0), (np.imag(x), 1j))
            for x in (np.asarray(u, dtype=complex), np.asarray(v, dtype=complex), np.asarray(z, dtype=complex))
        ]
        total = 0j
        for (a, ca), (b, cb), (c, cc) in itertools.product(*pieces):
            total = total + ca * cb * cc * real_form(a, b, c)
        return total

    return form


def finite_difference_forms(
    fun: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, h2: float = 1e-3, h3: float = 2e-3
) -> Tuple[Bilinear, Trilinear]:
    """
    Second and third derivatives of ``fun`` at x0 as complex multilinear forms.

    Directional differences are Richardson-extrapolated and polarized.
    """
    x0 = np.asarray(x0, dtype=float)
    f0 = np.asarray(fun(x0))

    def second(u_hat, h):
        return (fun(x0 + h * u_hat) - 2.0 * f0 + fun(x0 - h * u_hat)) / (h * h)

    def third(u_hat, h):
        return (
            fun(x0 + 2 * h * u_hat) - 2.0 * fun(x0 + h * u_hat) + 2.0 * fun(x0 - h * u_hat) - fun(x0 - 2 * h * u_hat)
        ) / (2.0 * h**3)

    def quadratic(u):
        norm = np.linalg.norm(u)
        if norm == 0:
            return np.zeros_like(f0)
        u_hat = u / norm
        return norm**2 * (4.0 * second(u_hat, h2 / 2) - second(u_hat, h2)) / 3.0

    def cubic(u):
        norm = np.linalg.norm(u)
        if norm == 0:
            return np.zeros_like(f0)
        u_hat = u / norm
        return norm**3 * (4.0 * third(u_hat, h3 / 2) - third(u_hat, h3)) / 3.0

    def bilinear(u, v):
        return (quadratic(u + v) - quadratic(u - v)) / 4.0

    def trilinear(u, v, z):
        return (
            cubic(u + v + z) - cubic(u + v) - cubic(u + z) - cubic(v + z) + cubic(u) + cubic(v) + cubic(z)
        ) / 6.0

    return _complex_bilinear(bilinear), _complex_trilinear(trilinear)


def first_lyapunov_coefficient(J: np.ndarray, B: Bilinear, C: Trilinear) -> Tuple[float, float]:
    """
    First Lyapunov coefficient at a Hopf point.

    q solves J q = i omega q with <q, q> = 1; p solves J^T p = -i omega p with
    <p, q> = 1, where <a, b> = conj(a) . b.

    Returns:
        (l1, omega)
    """
    eigenvalues, vectors = np.linalg.eig(J)
    k = int(np.argmax(eigenvalues.imag))
    omega = float(eigenvalues[k].imag)
    if omega <= 0:
        raise NotAHopfCandidateError("The Jacobian has no eigenvalue pair on the imaginary axis")
    q = vectors[:, k] / np.linalg.norm(vectors[:, k])
    adj_values, adj_vectors = np.linalg.eig(J.T)
    j = int(np.argmin(np.abs(adj_values + 1j * omega)))
    p = adj_vectors[:, j]
    p = p / np.conj(np.vdot(p, q))

    n = J.shape[0]
    term_c = np.vdot(p, C(q, q, np.conj(q)))
    term_b = np.vdot(p, B(q, np.linalg.solve(J, B(q, np.conj(q)))))
    term_r = np.vdot(p, B(np.conj(q), np.linalg.solve(2j * omega * np.eye(n) - J, B(q, q))))
    return float((term_c - 2.0 * term_b + term_r).real / (2.0 * omega)), omega


def hopf_candidate(net: NetworkConfig) -> NetworkConfig:
    """Return the network with alpha moved onto the Hopf value w f'(I)."""
    _, w, I = _single(net)
    return net.with_param("alpha", w * float(net.activations[0].derivative(I, 1)))


def _bcc_exact_forms(net: NetworkConfig) -> Tuple[Bilinear, Trilinear]:
    """Exact second and third derivatives of the one-population BCC field at (0, 0)."""
    _, w, I = _single(net)
    act = net.activations[0]
    n = float(net.inverse_sizes[0])
    f2, f3, f4 = (float(act.derivative(I, k)) for k in (2, 3, 4))

    def bilinear(u, v):
        cross = u[0] * v[1] + u[1] * v[0]
        return np.array([
            f2 * w**2 * u[0] * v[0] + 0.5 * f3 * w**3 * cross,
            4.0 * n * f2 * w**2 * u[0] * v[0] + 2.0 * f2 * w**2 * cross,
        ])

    def trilinear(u, v, z):
        xxx = u[0] * v[0] * z[0]
        xxy = u[0] * v[0] * z[1] + u[0] * v[1] * z[0] + u[1] * v[0] * z[0]
        return np.array([
            f3 * w**3 * xxx + 0.5 * f4 * w**4 * xxy,
            6.0 * n * f3 * w**3 * xxx + 2.0 * f3 * w**3 * xxy,
        ])

    return bilinear, trilinear


def hopf_genericity(net: NetworkConfig, rel_tol: float = 1e-6) -> HopfReport:
    """
    Genericity conditions of the Hopf point of one BCC population at nu = 0, c = 0.

    Args:
        net: One population with f(I) = 0, f''(I) < 0, alpha = w f'(I) and finite N
        rel_tol: Relative tolerance for the alpha = w f'(I) precondition

    Returns:
        HopfReport

    Raises:
        NotAHopfCandidateError: If a precondition fails
    """
    if net.M != 1:
        raise NotAHopfCandidateError("The Hopf construction needs exactly one population")
    alpha, w, I = _single(net)
    act = net.activations[0]
    n = float(net.inverse_sizes[0])
    f0, f1, f2, f3 = (float(act.derivative(I, k)) for k in range(4))
    if abs(f0) > 1e-10:
        raise NotAHopfCandidateError(f"f(I) must vanish, got {f0:.3e}")
    if n <= 0:
        raise NotAHopfCandidateError("The Hopf construction needs a finite population size")
    if not f2 < 0:
        raise NotAHopfCandidateError(f"f''(I) must be negative, got {f2:.3e} (determinant non-positive)")
    if abs(alpha - w * f1) > rel_tol * abs(alpha):
        raise NotAHopfCandidateError(f"alpha={alpha} is not on the Hopf value w f'(I)={w * f1}")
    radicand = -f1 * f2 * w**3 * n
    if radicand <= 0:
        raise NotAHopfCandidateError("-f' f'' w^3 / N must be positive (determinant non-positive)")
    omega0 = math.sqrt(radicand)

    origin = MomentState([0.0], [0.0])
    J = jacobian(ModelVariant.BCC, origin, net)
    eigenvalues = np.linalg.eigvals(J)
    omega_numeric = float(np.max(eigenvalues.imag))

    step = 1e-6 * alpha
    real_parts = []
    for a in (alpha - step, alpha + step):
        shifted = np.linalg.eigvals(jacobian(ModelVariant.BCC, origin, net.with_param("alpha", a)))
        real_parts.append(float(shifted[np.argmax(shifted.imag)].real))
    transversality = (real_parts[1] - real_parts[0]) / (2.0 * step)

    field = flat_field(ModelVariant.BCC, net)
    B_fd, C_fd = finite_difference_forms(lambda y: field(0.0, y), origin.flat)
    l1, _ = first_lyapunov_coefficient(J, B_fd, C_fd)
    B_exact, C_exact = _bcc_exact_forms(net)
    l1_analytic, _ = first_lyapunov_coefficient(J, _complex_bilinear(B_exact), _complex_trilinear(C_exact))
    indicator = f3 * f1 * (1.0 + 1.0 / omega0) + f2**2 * (2.0 / omega0 - 14.0 / 3.0)
    l1_closed_form = w**2 / (n * 2.0 * omega0 * f1**2) * indicator

    scale = max(abs(l1_analytic), 1e-300)
    if abs(l1) <= 1e-9 * scale:
        criticality = Criticality.DEGENERATE
    else:
        criticality = Criticality.SUPERCRITICAL if l1 < 0 else Criticality.SUBCRITICAL
    report = HopfReport(
        omega0, omega_numeric, transversality, l1, l1_analytic, indicator, l1_closed_form, criticality
    )
    if not report.omega_agrees:
        logger.warning(f"Hopf frequency mismatch: closed form {omega0:.10g}, eigenvalue {omega_numeric:.10g}")
    if not report.signs_agree:
        logger.warning(
            f"Lyapunov coefficient signs disagree: l1={l1:.6g}, exact forms {l1_analytic:.6g}, "
            f"closed form {l1_closed_form:.6g}"
        )
    logger.info(f"Hopf genericity: omega0={omega0:.6g}, l1={l1:.6g} ({criticality.value})")
    return report
