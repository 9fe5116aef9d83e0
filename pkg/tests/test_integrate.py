"""
Time stepping, Poincare sections, monodromy matrices and shooting.
"""
import sys
import os

# Add parent directory to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np
import pytest

from momentfield.exceptions import ConfigurationError, CycleNotFoundError, OrbitClosureError
from momentfield.integrate import (
    CycleStability,
    Section,
    Trajectory,
    classify_cycle,
    cycle_from_transient,
    cycle_multipliers,
    estimate_period,
    find_cycle,
    integrate,
    monodromy,
    nontrivial_multipliers,
    poincare_map,
    resolvent,
)
from momentfield.models import ModelVariant, MomentState
from tests.test_utils import model1, one_population


def test_uncoupled_population_relaxes_exponentially():
    """With w = 0 and I = 0 the logistic drive is 1/2, so nu(t) = (1 - e^-t) / 2."""
    net = one_population(w=0.0, I=0.0)
    traj = integrate("wc", MomentState([0.0]), net, 5.0, n_points=51)
    exact = 0.5 * (1.0 - np.exp(-traj.times))
    assert np.max(np.abs(traj.nu[:, 0] - exact)) < 1e-7
    assert traj.final_state.nu[0] == pytest.approx(0.5 * (1.0 - np.exp(-5.0)), abs=1e-7)
    assert len(traj.tail(0.2).times) == 11


def test_correlation_block_is_added_for_moment_systems():
    """A Wilson-Cowan start gets a zero correlation block; infinite size keeps it zero at w = 0."""
    net = one_population(w=0.0, I=0.0, N=None)
    traj = integrate("infinite", MomentState([0.0]), net, 2.0, n_points=5)
    assert traj.states.shape == (5, 2)
    assert np.allclose(traj.corr_packed, 0.0)


def test_section_crossing_located_during_integration():
    """nu crosses 1/4 upward at t = ln 2."""
    net = one_population(w=0.0, I=0.0)
    traj = integrate("wc", MomentState([0.0]), net, 3.0, section=Section(0, 0.25, 1))
    assert len(traj.crossing_times) == 1
    assert traj.crossing_times[0] == pytest.approx(np.log(2.0), abs=1e-6)


def test_backward_integration_reverses_time():
    net = one_population(w=0.0, I=0.0)
    traj = integrate("wc", MomentState([0.4]), net, 1.0, backward=True, n_points=3)
    assert traj.final_state.nu[0] == pytest.approx(0.5 - 0.1 * np.e, abs=1e-7)


def test_nonpositive_horizon_is_rejected():
    with pytest.raises(ConfigurationError):
        integrate("wc", MomentState([0.0]), one_population(), 0.0)


def _sine_trajectory(period: float = 2 * np.pi, cycles: int = 10) -> Trajectory:
    # a quarter period past the last full cycle keeps the end off a crossing
    times = np.linspace(0.0, (cycles + 0.25) * period, cycles * 2000 + 501)
    states = np.column_stack([np.sin(2 * np.pi * times / period), np.cos(2 * np.pi * times / period)])
    return Trajectory(times, states, ModelVariant.WILSON_COWAN, 2)


def test_poincare_map_of_a_sine():
    """Upward zero crossings of sin(t) sit at multiples of 2 pi, where cos(t) = 1."""
    crossings = poincare_map(_sine_trajectory(), Section(0, 0.0, 1))
    assert len(crossings) == 10
    assert np.allclose(crossings.times, 2 * np.pi * np.arange(1, 11), atol=1e-5)
    assert np.allclose(crossings.states[:, 1], 1.0, atol=1e-5)
    assert crossings.spread() < 1e-4

    downward = poincare_map(_sine_trajectory(), Section(0, 0.0, -1))
    assert len(downward) == 10
    assert len(poincare_map(_sine_trajectory(), Section.named("nu_1", 2.0, 2))) == 0


def test_period_estimate():
    assert estimate_period(_sine_trajectory(period=3.0)) == pytest.approx(3.0, abs=1e-3)


def test_period_estimate_needs_oscillation():
    net = one_population(w=0.0, I=0.0)
    traj = integrate("wc", MomentState([0.5]), net, 10.0)
    with pytest.raises(CycleNotFoundError):
        estimate_period(traj)


def test_monodromy_at_an_equilibrium():
    """At the equilibrium of dnu/dt = -nu + 1/2 the monodromy is e^(-T)."""
    net = one_population(w=0.0, I=0.0, N=None)
    phi = monodromy("wc", MomentState([0.5]), 2.0, net)
    assert phi[0, 0] == pytest.approx(np.exp(-2.0), rel=1e-6)
    lifted = monodromy("infinite", MomentState([0.5], [0.0]), 2.0, net)
    assert np.allclose(np.diag(lifted), [np.exp(-2.0), np.exp(-4.0)], rtol=1e-6)


def test_monodromy_requires_a_closed_orbit():
    net = one_population(w=0.0, I=0.0)
    with pytest.raises(OrbitClosureError):
        monodromy("wc", MomentState([0.1]), 1.0, net)


def test_resolvent_of_a_constant_system():
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    phi = resolvent(lambda t, x: A, 2 * np.pi)
    assert np.allclose(phi, np.eye(2), atol=1e-6)


def test_cycle_classification():
    """The multiplier closest to one is the trivial one and is ignored."""
    assert list(nontrivial_multipliers([0.5, 1.0 + 1e-9, 0.2])) == [0.5, 0.2]
    assert classify_cycle([1.0, 0.5]) is CycleStability.STABLE
    assert classify_cycle([1.0, 1.5]) is CycleStability.UNSTABLE
    assert classify_cycle([1.0, 0.9995]) is CycleStability.NEUTRAL
    assert classify_cycle([1.0, 0.5j + 0.5]) is CycleStability.STABLE


def test_find_cycle_refuses_an_equilibrium():
    net = one_population(w=10.0, I=-5.0)
    with pytest.raises(CycleNotFoundError):
        find_cycle("wc", MomentState([0.5]), 5.0, net)


@pytest.mark.slow
def test_wilson_cowan_limit_cycle():
    """Model I oscillates at I1 = -0.5; the cycle is stable with a trivial multiplier at one."""
    net = model1()
    cycle = cycle_from_transient("wc", MomentState.zeros(2, "wc"), net, transient=200.0)
    assert cycle.period > 0
    assert cycle.trivial_multiplier_error < 1e-4
    assert cycle.stability is CycleStability.STABLE
    assert cycle.residual < 1e-8

    # embedded with zero correlations, the products mu_i mu_j add a second unit multiplier
    lifted = cycle_multipliers("infinite", cycle, net)
    assert lifted.size == 5
    assert np.sum(np.abs(lifted - 1.0) < 1e-3) >= 2
