"""
Vector fields of the five deterministic systems and the one-population closed
forms of the infinite-size system.
"""
import sys
import os

# Add parent directory to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np
import pytest

from momentfield.exceptions import ConfigurationError, EvaluationError
from momentfield.kronecker import match_spectra, pairwise_sums
from momentfield.models import ModelVariant, MomentState, NetworkConfig
from momentfield.steady_state import (
    StabilityClass,
    classify_eigenvalues,
    correlated_fixed_points,
    correlated_jacobian,
    find_fixed_points,
    jacobian,
    zero_correlation_jacobian,
)
from momentfield.systems import flat_field, flat_jacobian, rhs, state_dimension, wc_jacobian
from momentfield.systems.rodriguez_tuckwell import noise_amplitude
from tests.test_utils import model1, one_population


def test_wilson_cowan_balance_point():
    """nu = 1/2 balances decay and drive for w = 10, I = -5."""
    net = one_population(w=10.0, I=-5.0)
    derivative = rhs("wc", MomentState([0.5]), net)
    assert abs(derivative.nu[0]) < 1e-15
    assert derivative.corr_packed.size == 0


def test_state_dimensions():
    assert state_dimension("wc", 3) == 3
    assert state_dimension("bcc", 3) == 9
    assert state_dimension(ModelVariant.RODRIGUEZ_TUCKWELL, 1) == 2


def test_infinite_system_without_correlations_is_wilson_cowan():
    """The mean equation reduces to Wilson-Cowan when the correlation block vanishes."""
    net = model1()
    nu = np.array([0.23, 0.61])
    wc = rhs("wc", MomentState(nu), net)
    inf = rhs("infinite", MomentState(nu, np.zeros(3)), net)
    assert np.allclose(inf.nu, wc.nu, atol=1e-15)
    assert np.allclose(inf.corr_packed, 0.0)


def test_bcc_and_bressloff_reduce_to_infinite_size():
    """With n = 0 the finite-size closures are the infinite-size system."""
    net = model1().with_param("n", 0.0)
    state = MomentState([0.23, 0.61], [0.004, -0.001, 0.003])
    inf = rhs("infinite", state, net)
    for variant in ("bcc", "bressloff", "rt"):
        assert np.allclose(rhs(variant, state, net).flat, inf.flat, atol=1e-15)


def test_bcc_cross_source():
    """At zero cumulant the BCC source is f_i' w_ij nu_j / N_j symmetrised."""
    net = model1()
    nu = np.array([0.23, 0.61])
    derivative = rhs("bcc", MomentState(nu, np.zeros(3)), net)
    s = net.total_current(nu)
    gain = net.activation(s, 1)[:, None] * net.w
    source = gain * (nu / 50.0)[None, :]
    expected = source + source.T
    assert np.allclose(derivative.corr, expected, atol=1e-15)


def test_bressloff_poisson_source():
    """At zero correlation the Bressloff source is diag(n (alpha nu + f))."""
    net = model1()
    nu = np.array([0.23, 0.61])
    derivative = rhs("bressloff", MomentState(nu, np.zeros(3)), net)
    f = net.activation(net.total_current(nu))
    assert np.allclose(derivative.corr, np.diag((nu + f) / 50.0), atol=1e-15)


def test_rt_matches_bressloff_at_half_exponent():
    """With eps = sqrt(n) and zero correlation the two sources coincide."""
    net = model1()
    state = MomentState([0.23, 0.61], np.zeros(3))
    half = NetworkConfig(net.alpha, net.w, net.inputs, net.inverse_sizes, net.activations, net.up_rate, 0.5)
    assert np.allclose(rhs("rt", state, half).flat, rhs("bressloff", state, net).flat, atol=1e-15)
    assert np.allclose(noise_amplitude(half), np.sqrt(net.inverse_sizes))


def test_rt_noise_switches_off():
    """An infinite exponent leaves only the transport term."""
    net = one_population(noise_exponent=float("inf"))
    state = MomentState([0.3], [0.0])
    assert rhs("rt", state, net).corr_packed[0] == 0.0
    assert noise_amplitude(net).tolist() == [0.0]


def test_rt_source_carries_half_the_curvature_term():
    """The diagonal source adds 1/2 f''(s) (w C w)_ii to alpha nu + f, scaled by eps^2."""
    state = MomentState([0.3], [0.01])
    noisy = rhs("rt", state, one_population(w=10.0, I=-5.0, N=50)).corr_packed[0]
    quiet = rhs("rt", state, one_population(w=10.0, I=-5.0, N=50, noise_exponent=float("inf"))).corr_packed[0]
    f = 1.0 / (1.0 + np.exp(2.0))
    f2 = f * (1.0 - f) * (1.0 - 2.0 * f)
    expected = (0.3 + f + 0.5 * f2 * 100.0 * 0.01) / 50.0 ** 2
    assert noisy - quiet == pytest.approx(expected, rel=1e-9)


def test_analytic_wilson_cowan_jacobian():
    """The analytic Jacobian agrees with central differences."""
    net = model1()
    nu = np.array([0.31, 0.52])
    analytic = flat_jacobian("wc", net)(nu)
    numeric = flat_jacobian("wc", net, analytic=False)(nu)
    assert np.allclose(analytic, numeric, atol=1e-7)
    assert np.allclose(wc_jacobian(nu, net), analytic)


def test_field_rejects_bad_states():
    """Non-finite or mis-sized states raise EvaluationError."""
    field = flat_field("bcc", model1())
    with pytest.raises(EvaluationError):
        field(0.0, np.array([0.1, np.nan, 0.0, 0.0, 0.0]))
    with pytest.raises(EvaluationError):
        field(0.0, np.zeros(2))


def test_infinite_jacobian_spectrum_at_zero_correlation():
    """At D = 0 the spectrum is eig(A) together with the sums lambda_i + lambda_j, i <= j."""
    net = model1()
    nu = np.array([0.31, 0.52])
    lam = np.linalg.eigvals(wc_jacobian(nu, net))
    J = jacobian("infinite", MomentState(nu, np.zeros(3)), net)
    expected = np.concatenate([lam, pairwise_sums(lam, upper_only=True)])
    assert match_spectra(expected, np.linalg.eigvals(J), 1e-5)


def test_zero_correlation_jacobian_closed_form():
    """The 2 x 2 closed form equals the numerical Jacobian of the infinite system."""
    net = one_population(w=10.0, I=-5.0)
    for nu in (0.2, 0.5, 0.8):
        numeric = jacobian("infinite", MomentState([nu], [0.0]), net)
        assert np.allclose(zero_correlation_jacobian(net, nu), numeric, atol=1e-7)


def test_correlated_fixed_points_are_saddles():
    """Both correlated equilibria solve the system and have det = -(f'')^2 w^4 Delta < 0."""
    net = one_population(w=10.0, I=-5.0, N=None)
    points = correlated_fixed_points(net)
    assert len(points) == 2
    nus = sorted(p.nu[0] for p in points)
    assert nus[0] == pytest.approx(0.2937, abs=1e-3)
    assert nus[1] == pytest.approx(0.7063, abs=1e-3)
    field = flat_field("infinite", net)
    act = net.activations[0]
    for point in points:
        delta = point.corr_packed[0]
        assert delta == pytest.approx(0.0467, abs=1e-3)
        assert np.max(np.abs(field(0.0, point.flat))) < 1e-10
        J = correlated_jacobian(net, point)
        assert np.allclose(J, jacobian("infinite", point, net), atol=1e-6)
        f2 = float(act.derivative(10.0 * point.nu[0] - 5.0, 2))
        assert np.linalg.det(J) == pytest.approx(-(f2**2) * 10.0**4 * delta, rel=1e-8)
        assert classify_eigenvalues(np.linalg.eigvals(J)) is StabilityClass.SADDLE


def test_closed_forms_need_one_population():
    with pytest.raises(ConfigurationError):
        zero_correlation_jacobian(model1(), 0.3)


def test_zero_correlation_spectrum_over_random_networks():
    """At every Wilson-Cowan equilibrium the infinite-size spectrum is {lambda_i} and {lambda_i + lambda_j}."""
    rng = np.random.default_rng(2024)
    checked = 0
    for trial in range(50):
        M = 1 + trial % 3
        net = NetworkConfig(
            alpha=rng.uniform(0.5, 2.0, M),
            w=rng.normal(0.0, 4.0, (M, M)),
            inputs=rng.normal(0.0, 2.0, M),
        )
        points = find_fixed_points("wc", net)
        assert points
        for point in points:
            lam = np.linalg.eigvals(wc_jacobian(point.state.nu, net))
            expected = np.concatenate([lam, pairwise_sums(lam, upper_only=True)])
            gaps = np.abs(expected[:, None] - expected[None, :]) + np.eye(expected.size)
            if np.min(gaps) < 1e-3:
                # nearly repeated eigenvalues are too ill-conditioned for a 1e-6 comparison
                continue
            J = jacobian("infinite", MomentState(point.state.nu, np.zeros(M * (M + 1) // 2)), net)
            assert match_spectra(expected, np.linalg.eigvals(J), 1e-6)
            checked += 1
    assert checked >= 40


def test_no_stable_equilibrium_with_positive_correlation():
    """Randomized one-population scans never find a stable infinite-size point with Delta > 0."""
    rng = np.random.default_rng(7)
    positive = 0
    for _ in range(30):
        w = rng.uniform(6.0, 14.0)
        net = one_population(w=w, I=-w / 2.0 + rng.uniform(-1.5, 1.5), N=None)
        act = net.activations[0]
        for point in find_fixed_points("infinite", net):
            delta = point.state.corr_packed[0]
            s = w * point.state.nu[0] + net.inputs[0]
            if delta <= 1e-6 or abs(float(act.derivative(s, 2))) < 1e-6:
                continue
            positive += 1
            assert point.stability is not StabilityClass.STABLE
            assert np.linalg.det(jacobian("infinite", point.state, net)) < 0
    assert positive >= 5
