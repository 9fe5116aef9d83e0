"""
Master equation of small networks and its agreement with the Gillespie engine.
"""
import sys
import os

# Add parent directory to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np
import pytest

from momentfield.exceptions import ConfigurationError, StateSpaceTooLargeError
from momentfield.models import MarkovState, UpRateMode
from momentfield.stochastic import generator_matrix, master_evolve, run_ensemble, state_space
from tests.test_utils import absorbing_network, model1, one_population, within_standard_errors


def test_state_space_enumeration():
    shape, states = state_space(model1(N=3))
    assert shape == (4, 4)
    assert states.shape == (16, 2)
    assert states[0].tolist() == [0, 0]
    assert states[1].tolist() == [0, 1]
    assert states[-1].tolist() == [3, 3]


def test_generator_columns_sum_to_zero():
    A = generator_matrix(model1(N=5))
    assert A.shape == (36, 36)
    assert np.max(np.abs(np.asarray(A.sum(axis=0)).ravel())) < 1e-10
    dense = A.toarray()
    off_diagonal = dense - np.diag(np.diag(dense))
    assert np.all(off_diagonal >= 0)


def test_probability_is_conserved():
    sol = master_evolve(model1(N=8), MarkovState([4, 4]), 50.0, n_points=11)
    assert np.allclose(sol.mass, 1.0, atol=1e-10)
    assert np.all(sol.probabilities > -1e-12)
    assert sol.distribution(-1).shape == (9, 9)


def test_absorbing_distribution_is_constant():
    sol = master_evolve(absorbing_network(), MarkovState([0]), 10.0, n_points=5)
    assert np.allclose(sol.probabilities, sol.probabilities[0], atol=1e-14)
    assert np.allclose(sol.mean, 0.0)


def test_independent_neurons_reach_the_binomial():
    """Without coupling each quiescent neuron switches on at f / N = 1/24 and off at 1: p = 1/25."""
    net = one_population(w=0.0, I=0.0, N=12, up_rate=UpRateMode.QUIESCENT)
    sol = master_evolve(net, MarkovState([0]), 50.0, n_points=3)
    p = 1.0 / 25.0
    assert sol.mean[-1, 0] == pytest.approx(p, abs=1e-8)
    assert sol.second[-1, 0, 0] == pytest.approx(p * (1 - p) / 12 + p**2, abs=1e-8)


def test_state_space_limit():
    """Two populations of 400 give 401^2 states, above the limit."""
    with pytest.raises(StateSpaceTooLargeError) as info:
        master_evolve(model1(N=400), MarkovState([200, 200]), 1.0)
    assert info.value.size == 401**2
    assert info.value.exit_code == 4


def test_initial_distribution_checks():
    net = one_population(N=4)
    with pytest.raises(ConfigurationError):
        master_evolve(net, MarkovState([5]), 1.0)
    with pytest.raises(ConfigurationError):
        master_evolve(net, np.full(5, 0.1), 1.0)
    with pytest.raises(ConfigurationError):
        master_evolve(net, np.full(4, 0.25), 1.0)
    uniform = master_evolve(net, np.full(5, 0.2), 1.0, n_points=2)
    assert uniform.mass[-1] == pytest.approx(1.0, abs=1e-12)


def test_gillespie_matches_the_master_equation():
    """Ensemble moments agree with the exact ones within four standard errors."""
    net = one_population(w=10.0, I=-5.0, N=10)
    sol = master_evolve(net, MarkovState([5]), 25.0, n_points=26)
    stats = run_ensemble(net, [5], 25.0, paths=2000, seed=2024, n_points=26)
    for t in (1.0, 5.0, 25.0):
        k = stats.index_of(t)
        assert within_standard_errors(stats.mean[k], stats.mean_stderr[k], sol.mean[k])
        assert within_standard_errors(stats.second[k], stats.second_stderr[k], sol.second[k])
