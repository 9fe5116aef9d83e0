"""
Transition rates, the exact event engine and Monte-Carlo ensembles.
"""
import sys
import os

# Add parent directory to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np
import pytest

from momentfield.exceptions import ConfigurationError, ModelError
from momentfield.models import MarkovState, NetworkConfig, UpRateMode
from momentfield.stochastic import (
    EventLog,
    choose_channel,
    gillespie_step,
    rate_table,
    read_event_log,
    run_ensemble,
    simulate_path,
    transition_rates,
)
from momentfield.stochastic.gillespie import run_lockstep
from momentfield.stochastic.rng import UniformBuffer, path_generator
from tests.test_utils import absorbing_network, model1, one_population, shifted_tanh, within_standard_errors


# ========== Rates ==========


def test_default_up_rate_is_the_activation():
    """A network file without up_rate uses f itself as the up-rate."""
    net = NetworkConfig.from_dict({"M": 1, "w": 10.0, "I": -5.0, "N": 50})
    assert net.up_rate is UpRateMode.LITERAL
    down, up = transition_rates(MarkovState([10]), net)
    f = float(net.activation(net.total_current(np.array([10 / 50])))[0])
    assert up.tolist() == [f]
    assert down.tolist() == [10.0]


def test_population_rates():
    """w = 0, I = 0: the drive is 1/2, so the opt-in population rate is N / 2."""
    net = one_population(w=0.0, I=0.0, N=10, up_rate=UpRateMode.POPULATION)
    down, up = transition_rates(MarkovState([4]), net)
    assert down.tolist() == [4.0]
    assert up.tolist() == [5.0]


def test_rates_vanish_at_the_box_edges():
    net = one_population(w=0.0, I=0.0, N=10)
    down, up = transition_rates(MarkovState([0]), net)
    assert down.tolist() == [0.0] and up.tolist() == [0.5]
    down, up = transition_rates(MarkovState([10]), net)
    assert down.tolist() == [10.0] and up.tolist() == [0.0]


def test_up_rate_modes():
    counts = MarkovState([4])
    quiescent = one_population(w=0.0, I=0.0, N=10, up_rate=UpRateMode.QUIESCENT)
    literal = one_population(w=0.0, I=0.0, N=10, up_rate=UpRateMode.LITERAL)
    assert transition_rates(counts, quiescent)[1].tolist() == pytest.approx([0.3])
    assert transition_rates(counts, literal)[1].tolist() == [0.5]
    assert transition_rates(counts, literal.with_up_rate("population"))[1].tolist() == [5.0]
    with pytest.raises(ConfigurationError):
        literal.with_up_rate("per-neuron")


def test_negative_activation_is_a_model_error():
    """Shifted tanh with threshold 1/2 is negative at zero input."""
    net = one_population(w=0.0, I=0.0, N=10, activation=shifted_tanh(0.5))
    with pytest.raises(ModelError):
        transition_rates(MarkovState([3]), net)


def test_rate_table_orders_down_then_up():
    net = model1()
    table = rate_table(np.array([[10, 20], [0, 50]]), net)
    assert table.shape == (2, 4)
    assert table[0, :2].tolist() == [10.0, 20.0]
    assert table[1, 0] == 0.0
    assert table[1, 3] == 0.0
    assert np.all(table >= 0)


# ========== Events ==========


def test_choose_channel_picks_by_cumulative_rate():
    rates = np.array([[1.0, 0.0, 3.0]] * 3)
    u = np.array([0.2, 0.5, 0.999999])
    assert choose_channel(rates, u).tolist() == [0, 2, 2]
    # a draw landing on Q falls back to the last live channel
    assert choose_channel(np.array([[1.0, 3.0, 0.0]]), np.array([1.0])).tolist() == [1]


def test_choose_channel_frequencies():
    """With rates 1 and 3 the second channel fires three times in four."""
    rng = np.random.default_rng(21)
    draws = 20000
    u = rng.random(draws)
    picks = choose_channel(np.tile([1.0, 3.0], (draws, 1)), u)
    frequency = float(np.mean(picks == 1))
    stderr = np.sqrt(0.75 * 0.25 / draws)
    assert within_standard_errors(frequency, stderr, 0.75)


def test_waiting_times_are_exponential():
    """From n = N = 5 only the down channel is live, with total rate 5."""
    net = absorbing_network(N=5)
    rng = np.random.default_rng(8)
    start = MarkovState([5])
    waits = np.array([gillespie_step(start, net, rng).t for _ in range(4000)])
    assert np.all(waits > 0)
    assert within_standard_errors(waits.mean(), 0.2 / np.sqrt(waits.size), 0.2)
    assert gillespie_step(start, net, rng).n.tolist() == [4]


def test_absorbing_state_is_kept():
    net = absorbing_network()
    step = gillespie_step(MarkovState([0], t=1.5), net, np.random.default_rng(0))
    assert step.absorbing
    assert step.t == 1.5

    stats = run_ensemble(net, [0], 5.0, paths=4, seed=1, n_points=11)
    assert np.all(stats.flagged)
    assert stats.events == 0
    assert np.all(stats.mean == 0.0)


def test_decay_to_the_absorbing_state():
    """Every path of the pure death process ends at zero."""
    stats = run_ensemble(absorbing_network(N=10), [10], 50.0, paths=5, seed=2, n_points=11)
    assert stats.final_counts.ravel().tolist() == [0] * 5
    assert stats.events == 50
    assert np.all(stats.flagged)


# ========== Ensembles ==========


def test_ensembles_are_reproducible():
    net = one_population(w=10.0, I=-5.0, N=20)
    first = run_ensemble(net, [5], 5.0, paths=6, seed=7, n_points=51)
    second = run_ensemble(net, [5], 5.0, paths=6, seed=7, n_points=51)
    threaded = run_ensemble(net, [5], 5.0, paths=6, seed=7, n_points=51, workers=3)
    assert np.array_equal(first.samples, second.samples)
    assert np.array_equal(first.samples, threaded.samples)
    assert np.array_equal(first.second, threaded.second)
    other = run_ensemble(net, [5], 5.0, paths=6, seed=8, n_points=51)
    assert not np.array_equal(first.samples, other.samples)


def test_single_path_matches_ensemble_stream():
    """Path k of an ensemble and simulate_path(path=k) share one stream."""
    net = one_population(w=10.0, I=-5.0, N=20)
    stats = run_ensemble(net, [5], 5.0, paths=4, seed=7, n_points=51)
    path = simulate_path(net, [5], 5.0, seed=7, path=2, n_points=51)
    assert np.allclose(stats.samples[2] * 20, path.counts)
    assert np.allclose(path.proportions(net), stats.samples[2])


def test_counts_stay_in_the_box():
    net = model1()
    stats = run_ensemble(net, [25, 25], 10.0, paths=8, seed=3, n_points=101)
    assert np.all(stats.count_min >= 0)
    assert np.all(stats.count_max <= 50)
    assert np.all((stats.samples >= 0) & (stats.samples <= 1))
    assert stats.mean.shape == (101, 2)
    assert stats.second.shape == (101, 2, 2)
    assert stats.summary()["paths"] == 8


def test_initial_state_must_fit_the_box():
    with pytest.raises(ConfigurationError):
        run_ensemble(one_population(N=10), [11], 1.0, paths=2, seed=1)
    with pytest.raises(ConfigurationError):
        run_ensemble(one_population(N=10), [5], 1.0, paths=0, seed=1)


def test_standard_errors_need_two_paths():
    stats = run_ensemble(one_population(N=10), [5], 1.0, paths=1, seed=1, n_points=11)
    with pytest.raises(ConfigurationError):
        stats.mean_stderr


def test_event_log(tmp_path):
    """The binary log holds one record per event in time order."""
    net = one_population(w=10.0, I=-5.0, N=20)
    target = tmp_path / "events.bin"
    with EventLog(target) as log:
        path = simulate_path(net, [5], 3.0, seed=4, event_log=log)
    events = read_event_log(target)
    assert len(events) == path.events == log.count
    assert set(events["sign"].tolist()) <= {-1, 1}
    assert np.all(np.diff(events["t"]) > 0)
    assert np.all(events["population"] == 0)
    # replaying the log reproduces the final count
    assert 5 + int(events["sign"].sum()) == int(path.final.n[0])


def test_event_log_is_single_path_only(tmp_path):
    with EventLog(tmp_path / "events.bin") as log:
        with pytest.raises(ConfigurationError):
            run_lockstep(
                one_population(N=10), np.array([[5], [5]]), np.linspace(0.0, 1.0, 3),
                UniformBuffer([path_generator(1, 0), path_generator(1, 1)]), log,
            )


def test_uniform_buffer():
    with pytest.raises(ValueError):
        UniformBuffer([path_generator(1, 0)], block=3)
    buffer = UniformBuffer([path_generator(1, 0)], block=4)
    draws = np.concatenate([buffer.pairs(np.array([0]))[0] for _ in range(4)])
    assert np.array_equal(draws, path_generator(1, 0).random(8))
