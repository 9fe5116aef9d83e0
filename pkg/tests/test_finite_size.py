"""
Long reproduction runs: bifurcation values and cycle branches of the bundled networks, the
infinite-size limit of finite-size folds, and exact-versus-simulated moments.

Deselect with ``pytest -m "not slow"``.
"""
import sys
import os

# Add parent directory to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np
import pytest

from momentfield.bifurcation import (
    ParameterAxis,
    continue_codim2,
    continue_hopf_homotopy,
    extrapolate_fold_to_zero,
    hysteresis_sweep,
    inverse_size_axis,
    sweep_cycles,
    sweep_equilibria,
)
from momentfield.integrate import Section, cycle_from_transient, integrate
from momentfield.models import MarkovState, MomentState
from momentfield.numerics import ContinuationSettings
from momentfield.steady_state import StabilityClass, find_fixed_points
from momentfield.stochastic import master_evolve, power_spectrum, run_ensemble, spectral_peak
from tests.test_utils import logistic_fold_inputs, model1, one_population, shifted_tanh, within_standard_errors

pytestmark = pytest.mark.slow


def test_model1_hopf_input():
    """The Wilson-Cowan Model I loses its stable equilibrium near I1 = -3.245."""
    atlas = sweep_equilibria("wc", model1(), ParameterAxis("I1", -6.0, 1.0))
    hopf = [p.parameters["I1"] for p in atlas.points_of("H")]
    assert hopf
    assert min(abs(v + 3.245) for v in hopf) < 0.16


def test_bcc_keeps_two_folds():
    """At N = 50 the BCC system of one population still folds twice."""
    atlas = sweep_equilibria("bcc", one_population(w=10.0, N=50), ParameterAxis("I", -10.0, 0.0))
    assert len(atlas.points_of("LP")) == 2


def test_bcc_folds_extrapolate_to_wilson_cowan():
    """Folds continued in (I, n) tend to the Wilson-Cowan folds as n goes to zero."""
    net = one_population(w=10.0, N=50)
    atlas = sweep_equilibria("bcc", net, ParameterAxis("I", -10.0, 0.0))
    exact = logistic_fold_inputs(10.0)
    for fold in atlas.points_of("LP"):
        curves = continue_codim2("bcc", net, fold, (ParameterAxis("I", -10.0, 0.0), inverse_size_axis()))
        limit = extrapolate_fold_to_zero(curves.curves[0])
        assert min(abs(limit - e) for e in exact) < 0.05


@pytest.mark.parametrize("N", [5, 10, 20])
def test_gillespie_agrees_with_master_equation(N):
    net = one_population(w=10.0, I=-5.0, N=N)
    start = N // 2
    sol = master_evolve(net, MarkovState([start]), 5.0, n_points=6)
    for seed in (11, 12, 13):
        stats = run_ensemble(net, [start], 5.0, paths=1000, seed=seed, n_points=6)
        assert within_standard_errors(stats.mean[-1], stats.mean_stderr[-1], sol.mean[-1])
        assert within_standard_errors(stats.second[-1], stats.second_stderr[-1], sol.second[-1])


def test_asynchronous_state_of_model1():
    """Below the Hopf input, large networks fluctuate around the Wilson-Cowan equilibrium."""
    base = model1(I1=-5.0).with_up_rate("population")
    target = next(p for p in find_fixed_points("wc", base) if p.stability is StabilityClass.STABLE).state.nu
    spread = []
    for N in (100, 1000, 10000):
        net = base.with_param("N", N)
        counts = np.rint(target * N).astype(np.int64)
        stats = run_ensemble(net, counts, 50.0, paths=200, seed=99, n_points=201)
        mean, covariance = stats.settled()
        spread.append(float(np.max(np.abs(covariance))))
        if N == 10000:
            assert np.max(np.abs(mean - target)) < 0.01
    assert spread[0] > spread[1] > spread[2]
    assert spread[-1] < 1e-3


@pytest.mark.parametrize("alpha", [0.3, 0.8, 3.0])
def test_hopf_curve_leaves_admissible_region_before_nonnegative_activation(alpha):
    """No admissible Hopf point of the shifted-tanh family survives to p = 1."""
    net = one_population(w=10.0, I=0.5, N=50, activation=shifted_tanh(0.5))
    result = continue_hopf_homotopy(net, alpha=alpha)
    assert not result.reaches_nonnegative_activation


def test_model1_cycle_branch():
    """The Model I oscillation continues in I1 from a shot cycle, starting stable."""
    net = model1()
    cycle = cycle_from_transient("wc", MomentState.zeros(2, "wc"), net, transient=200.0)
    atlas = sweep_cycles(
        "wc", net, ParameterAxis("I1", -1.5, 0.5), cycle,
        settings=ContinuationSettings(max_points=12, tol=1e-8),
    )
    assert len(atlas.cycle_branches) == 1
    branch = atlas.cycle_branches[0]
    assert len(branch.values) >= 2
    assert branch.values[0] == pytest.approx(-0.5, abs=1e-6)
    assert np.all(branch.periods > 0)
    assert np.all(branch.minima <= branch.maxima)
    assert branch.stability[0] == "stable"


# ========== Model I in the Bressloff system ==========


def _within(value, target, rel=0.05):
    return abs(value - target) <= rel * abs(target)


def test_bressloff_model1_equilibrium_bifurcations():
    """At N = 50 the Bressloff Model I has four Hopf points and at least six folds."""
    atlas = sweep_equilibria("bressloff", model1(), ParameterAxis("I1", -12.0, 4.0), workers=4, seed_values=9)
    hopf = [p.parameters["I1"] for p in atlas.points_of("H")]
    assert len(hopf) == 4
    assert len(atlas.points_of("LP")) >= 6
    assert any(_within(v, -3.37) for v in hopf)


def test_bressloff_model1_cusp_in_inverse_size():
    """One of the N = 50 fold curves turns back at a cusp near n = 0.0867."""
    net = model1()
    atlas = sweep_equilibria("bressloff", net, ParameterAxis("I1", -12.0, 4.0), workers=4, seed_values=9)
    cusps = []
    for fold in atlas.points_of("LP"):
        curves = continue_codim2(
            "bressloff", net, fold, (ParameterAxis("I1", -12.0, 4.0), inverse_size_axis(upper=0.2))
        )
        cusps += [p.parameters["n"] for p in curves.points_of("CP")]
    assert any(_within(n, 0.0867) for n in cusps)


def _cycle_of_model1(N: float):
    """The stable Bressloff Model I cycle at I1 = -0.5, shot from a settled transient."""
    net = model1(I1=-0.5, N=N)
    start = MomentState([0.5, 0.5], [0.01, 0.0, 0.01])
    return net, cycle_from_transient("bressloff", start, net, transient=400.0)


def test_bressloff_cycle_folds_and_loses_stability_in_inverse_size():
    """Continued in n at I1 = -0.5, the cycle folds near n = 0.01418 and meets a torus point near n = 0.001174."""
    net, cycle = _cycle_of_model1(500)
    assert cycle.stability.value == "stable"
    axis = inverse_size_axis(1e-4, 0.05)
    settings = ContinuationSettings(max_points=300, tol=1e-8)
    towards_small = sweep_cycles("bressloff", net, axis, cycle, direction=-1.0, settings=settings)
    towards_large = sweep_cycles("bressloff", net, axis, cycle, direction=1.0, settings=settings)
    folds = [p.parameters["n"] for p in towards_large.points_of("LPC")]
    tori = [p.parameters["n"] for p in towards_small.points_of("NS")]
    assert any(_within(n, 0.01418) for n in folds)
    assert any(_within(n, 0.001174) for n in tori)


def test_poincare_section_scatters_beyond_the_torus_point():
    """Past the torus point the orbit no longer returns to one point of the section."""
    section = Section.named("nu_2", 0.7, 2)
    base, cycle = _cycle_of_model1(500)
    spreads = {}
    for N in (500, 5000):
        net = base.with_param("N", N)
        traj = integrate("bressloff", cycle.anchor, net, 3000.0, section=section)
        hits = traj.crossing_states[traj.crossing_times > 1000.0]
        assert len(hits) >= 30
        spreads[N] = float(max(np.ptp(hits[:, 0]), np.ptp(hits[:, 2])))
    assert spreads[500] < 1e-4
    assert spreads[5000] > 1e-3


# ========== Correlation-induced cycles ==========


def test_infinite_size_cycle_runs_at_half_the_wilson_cowan_period():
    """With small initial correlations at I1 = -2 the limit system settles on a faster cycle."""
    net = model1(I1=-2.0)
    wc = cycle_from_transient("wc", MomentState([0.5, 0.5]), net, transient=200.0)
    start = MomentState(wc.anchor.nu, [0.01, 0.0, 0.01])
    induced = cycle_from_transient("infinite", start, net, transient=600.0)
    assert induced.period / wc.period == pytest.approx(0.5, abs=0.1)
    orbit = integrate("infinite", induced.anchor, net, induced.period, n_points=400)
    assert np.max(np.abs(orbit.corr_packed)) > 1e-3


# ========== Markov chain against the moment equations ==========


def test_one_population_markov_hysteresis_matches_the_fold():
    """The bistable window of the Markov chain at N = 1000 ends at the finite-size folds."""
    step = 0.1
    values = np.round(np.arange(-7.5, -2.5 + step / 2, step), 10)
    net = one_population(w=10.0, N=1000).with_up_rate("population")
    atlas = sweep_equilibria("bcc", net, ParameterAxis("I", -10.0, 0.0))
    folds = sorted(p.parameters["I"] for p in atlas.points_of("LP"))
    assert len(folds) == 2
    result = hysteresis_sweep("gillespie", net, "I", values, dwell=30.0, paths=20, seed=5, workers=4)
    window = result.window
    assert window is not None
    assert abs(window[0] - folds[0]) <= 2 * step + 1e-9
    assert abs(window[1] - folds[1]) <= 2 * step + 1e-9


def test_model2_markov_hysteresis_matches_wilson_cowan():
    """Model II at N = 2000 switches where the rate equations do and stays uncorrelated elsewhere."""
    step = 0.5
    values = np.round(np.arange(-1.0, 11.0 + step / 2, step), 10)
    net = model2().with_up_rate("population")
    reference = hysteresis_sweep("ode", net, "I1", values, variant="wc").window
    markov = hysteresis_sweep("gillespie", net, "I1", values, dwell=20.0, paths=10, seed=8, workers=4)
    assert reference is not None and markov.window is not None
    assert abs(markov.window[0] - reference[0]) <= 2 * step + 1e-9
    assert abs(markov.window[1] - reference[1]) <= 2 * step + 1e-9
    away = np.min(np.abs(values[:, None] - np.array(reference)[None, :]), axis=1) > 2 * step
    for covariance in (markov.up_covariance, markov.down_covariance):
        assert np.max(np.abs(covariance[away])) < 2e-3


def _peak(I1: float, N: int, seed: int):
    net = model1(I1=I1, N=N).with_up_rate("population")
    stats = run_ensemble(net, [N // 2, N // 2], 400.0, paths=20, seed=seed, n_points=4001, workers=4)
    return spectral_peak(power_spectrum(stats))


def test_oscillations_appear_between_500_and_700_neurons():
    """At I1 = 0 the averaged spectrum is flat for N = 500 and peaked for N = 700."""
    assert _peak(0.0, 500, seed=21) is None
    assert _peak(0.0, 700, seed=21) is not None


def test_quasicycles_just_below_the_hopf_input():
    """At N = 1000 a spectral peak shows at I1 = -3.246 but not at I1 = -3.25."""
    assert _peak(-3.246, 1000, seed=33) is not None
    assert _peak(-3.25, 1000, seed=33) is None
