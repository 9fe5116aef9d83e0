"""
Equilibria, stability classes, admissibility and the Hopf genericity check.
"""
import sys
import os
import json

# Add parent directory to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np
import pytest

from momentfield.config import load_network
from momentfield.exceptions import NotAHopfCandidateError
from momentfield.models import MomentState
from momentfield.steady_state import (
    Criticality,
    SearchGrid,
    StabilityClass,
    classify_eigenvalues,
    deduplicate,
    find_fixed_points,
    first_lyapunov_coefficient,
    hopf_candidate,
    hopf_genericity,
    is_admissible,
)
from tests.test_utils import model1, one_population, relative_error, shifted_tanh


def test_bistable_population_has_three_equilibria():
    """w = 10, I = -5: low and high stable states around an unstable midpoint."""
    points = find_fixed_points("wc", one_population(w=10.0, I=-5.0))
    assert len(points) == 3
    assert [p.stability for p in points] == [
        StabilityClass.STABLE,
        StabilityClass.UNSTABLE,
        StabilityClass.STABLE,
    ]
    assert points[1].state.nu[0] == pytest.approx(0.5, abs=1e-10)
    assert points[0].state.nu[0] == pytest.approx(1.0 - points[2].state.nu[0], abs=1e-10)
    assert all(p.residual < 1e-10 for p in points)
    assert all(p.admissible for p in points)


def test_threads_find_the_same_equilibria():
    net = one_population(w=10.0, I=-5.0)
    serial = find_fixed_points("wc", net)
    threaded = find_fixed_points("wc", net, workers=3)
    assert [p.state.nu[0] for p in serial] == pytest.approx([p.state.nu[0] for p in threaded], abs=1e-12)


def test_bcc_equilibria_of_one_population():
    """The finite-size system keeps one equilibrium close to each Wilson-Cowan one."""
    net = one_population(w=10.0, I=-5.0, N=50)
    wc = [p.state.nu[0] for p in find_fixed_points("wc", net)]
    bcc = find_fixed_points("bcc", net)
    for target in wc:
        assert min(abs(p.state.nu[0] - target) for p in bcc) < 0.05
    for point in bcc:
        assert point.state.has_correlations
        assert point.residual < 1e-10


def test_stability_classes():
    assert classify_eigenvalues([-1.0, -2.0 + 1j, -2.0 - 1j]) is StabilityClass.STABLE
    assert classify_eigenvalues([-1.0, 0.5]) is StabilityClass.SADDLE
    assert classify_eigenvalues([0.2 + 1j, 0.2 - 1j]) is StabilityClass.UNSTABLE
    assert classify_eigenvalues([1e-10j, -1e-10j, -1.0]) is StabilityClass.CENTER_CANDIDATE


def test_admissibility():
    """Activities in [0, 1]; correlations positive semidefinite after the BCC shift."""
    net = one_population(N=50)
    assert is_admissible("wc", MomentState([0.4]), net)
    assert not is_admissible("wc", MomentState([1.2]), net)
    assert not is_admissible("bressloff", MomentState([0.4], [-0.01]), net)
    # c = -nu / N is the smallest admissible cumulant
    assert is_admissible("bcc", MomentState([0.4], [-0.4 / 50]), net)
    assert not is_admissible("bcc", MomentState([0.4], [-0.4 / 50 - 1e-3]), net)

    two = model1()
    indefinite = MomentState([0.3, 0.3], [0.01, 0.05, 0.01])
    assert not is_admissible("infinite", indefinite, two)


def test_fixed_point_record():
    """The JSON record lists eigenvalues as [re, im] pairs."""
    point = find_fixed_points("wc", one_population(w=10.0, I=-5.0))[1]
    data = point.to_dict()
    assert data["class"] == "unstable"
    assert data["variant"] == "wc"
    assert data["eigenvalues"][0] == pytest.approx([1.5, 0.0], abs=1e-6)
    json.dumps(data)


def test_deduplicate_and_grid():
    points = deduplicate([np.array([0.1]), np.array([0.1 + 1e-9]), np.array([-0.2])])
    assert [p[0] for p in points] == pytest.approx([-0.2, 0.1])
    grid = SearchGrid(nu_points=5, corr_points=3)
    assert grid.starts("wc", 2).shape == (25, 2)
    assert grid.starts("bcc", 1).shape == (15, 2)
    sampled = SearchGrid(max_starts=100).starts("bcc", 2)
    assert sampled.shape == (100, 5)


# ========== Hopf genericity ==========


def test_hopf_report_of_the_bundled_network():
    """Closed-form frequency, exact transversality and agreeing Lyapunov coefficients."""
    net = load_network("tanh_hopf.json")
    report = hopf_genericity(net)
    assert relative_error(report.omega0_numeric, report.omega0) < 1e-6
    assert report.omega_agrees
    assert report.transversality == pytest.approx(-1.5, abs=0.05)
    assert relative_error(report.l1, report.l1_analytic) < 0.05
    assert report.criticality is Criticality.SUPERCRITICAL
    assert report.l1 < 0
    assert set(report.to_dict()) >= {"omega0", "l1", "l1_analytic", "l1_closed_form", "criticality"}


def test_lyapunov_coefficient_sign_matches_the_closed_form():
    """The printed closed form uses unnormalised eigenvectors: only its sign is comparable."""
    report = hopf_genericity(load_network("tanh_hopf.json"))
    t = np.tanh(0.5)
    f1 = 1.0 - t**2
    f2 = -2.0 * t * f1
    f3 = -2.0 * f1 * (1.0 - 3.0 * t**2)
    omega0 = np.sqrt(-f1 * f2 * 10.0**3 / 50.0)
    bracket = f3 * f1 * (1.0 + 1.0 / omega0) + f2**2 * (2.0 / omega0 - 14.0 / 3.0)
    expected = 10.0**2 * 50.0 / (2.0 * omega0 * f1**2) * bracket
    assert report.omega0 == pytest.approx(omega0, rel=1e-9)
    assert report.l1_closed_form == pytest.approx(expected, rel=1e-9)
    assert report.l1_closed_form < 0
    assert report.signs_agree


def test_hopf_candidate_moves_alpha():
    """Any decay rate is replaced by w f'(I)."""
    net = one_population(w=10.0, I=0.5, N=50, activation=shifted_tanh(0.5))
    candidate = hopf_candidate(net)
    assert candidate.alpha[0] == pytest.approx(10.0 * (1.0 - np.tanh(0.5) ** 2))
    report = hopf_genericity(candidate)
    assert report.omega0 > 0


def test_hopf_frequency_scales_with_inverse_square_root_of_size():
    sizes = np.array([50.0, 100.0, 200.0, 400.0])
    omegas = []
    for N in sizes:
        net = hopf_candidate(one_population(w=10.0, I=0.5, N=N, activation=shifted_tanh(0.5)))
        omegas.append(hopf_genericity(net).omega0_numeric)
    slope = np.polyfit(np.log(sizes), np.log(omegas), 1)[0]
    assert abs(slope + 0.5) < 1e-3


def test_hopf_preconditions():
    """f(I) = 0, f'' < 0, finite N and alpha on the Hopf value are all required."""
    base = hopf_candidate(one_population(w=10.0, I=0.5, N=50, activation=shifted_tanh(0.5)))
    with pytest.raises(NotAHopfCandidateError):
        hopf_genericity(hopf_candidate(base.with_param("I", 0.7)))
    with pytest.raises(NotAHopfCandidateError):
        hopf_genericity(hopf_candidate(one_population(w=10.0, I=0.5, N=50)))
    with pytest.raises(NotAHopfCandidateError):
        hopf_genericity(base.with_param("n", 0.0))
    with pytest.raises(NotAHopfCandidateError):
        hopf_genericity(base.with_param("alpha", 2.0))
    # threshold below zero puts the zero of f where f'' > 0
    flipped = hopf_candidate(one_population(w=10.0, I=-0.5, N=50, activation=shifted_tanh(-0.5)))
    with pytest.raises(NotAHopfCandidateError):
        hopf_genericity(flipped)


def test_lyapunov_coefficient_of_the_normal_form():
    """x' = -y + x r^2, y' = x + y r^2 is z' = i z + 2 z |z|^2 in z = (x + iy) / sqrt 2, so l1 = 2."""
    J = np.array([[0.0, -1.0], [1.0, 0.0]])

    def bilinear(u, v):
        return np.zeros(2, dtype=complex)

    def trilinear(u, v, z):
        # third derivative of (x r^2, y r^2)
        return np.array([
            6 * u[0] * v[0] * z[0] + 2 * (u[0] * v[1] * z[1] + u[1] * v[0] * z[1] + u[1] * v[1] * z[0]),
            6 * u[1] * v[1] * z[1] + 2 * (u[1] * v[0] * z[0] + u[0] * v[1] * z[0] + u[0] * v[0] * z[1]),
        ])

    l1, omega = first_lyapunov_coefficient(J, bilinear, trilinear)
    assert omega == pytest.approx(1.0)
    assert l1 == pytest.approx(2.0, rel=1e-10)
