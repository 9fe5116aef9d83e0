"""
Exact Doob-Gillespie simulation of the population jump process.

Each event draws two uniforms from the path's stream: the first gives the
exponential waiting time with intensity Q = sum of all channel rates, the
second picks the channel with probability rate / Q. Channels are ordered
[down_1..down_M, up_1..up_M].

Paths are advanced in lockstep, one event per active path per sweep, and
sampled on an output grid with the left-constant convention: the value at a
grid time is the state holding just before the next jump.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from momentfield.config import resolve_seed
from momentfield.exceptions import ConfigurationError
from momentfield.models import MarkovState, NetworkConfig
from momentfield.stochastic.rates import rate_table
from momentfield.stochastic.rng import UniformBuffer, path_generator

logger = logging.getLogger(__name__)

EVENT_DTYPE = np.dtype([("t", "<f8"), ("population", "<u2"), ("sign", "i1")])
DEFAULT_GRID_POINTS = 501


def choose_channel(rates: np.ndarray, u: np.ndarray) -> np.ndarray:
    """
    Channel index per row: the first channel whose cumulative rate exceeds u * Q.

    Rows must have Q > 0. A draw that rounds onto Q falls back to the last
    channel with a positive rate.
    """
    cumulative = np.cumsum(rates, axis=1)
    target = u * cumulative[:, -1]
    channel = np.sum(cumulative <= target[:, None], axis=1)
    last_positive = rates.shape[1] - 1 - np.argmax(rates[:, ::-1] > 0, axis=1)
    return np.minimum(channel, last_positive)


def gillespie_step(state: MarkovState, net: NetworkConfig, rng: np.random.Generator) -> MarkovState:
    """
    One exact event from ``state``.

    Returns:
        The next state, or a copy flagged absorbing when no channel can fire
    """
    rates = rate_table(state.n, net)
    total = float(rates.sum())
    if total <= 0:
        return MarkovState(state.n.copy(), state.t, absorbing=True)
    u = rng.random(2)
    tau = -np.log1p(-u[0]) / total
    channel = int(choose_channel(rates, u[1:2])[0])
    n = state.n.copy()
    M = n.size
    n[channel % M] += -1 if channel < M else 1
    return MarkovState(n, state.t + tau)


class EventLog:
    """
    Binary event record: little-endian (t: float64, population: uint16, sign: int8).

    Example:
        with EventLog("events.bin") as log:
            simulate_path(net, init, 10.0, seed=1, event_log=log)
        events = read_event_log("events.bin")
    """

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._handle = None
        self.count = 0

    def __enter__(self) -> "EventLog":
        self._handle = open(self.path, "wb")
        return self

    def __exit__(self, *exc) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def write(self, t: float, population: int, sign: int) -> None:
        record = np.zeros(1, dtype=EVENT_DTYPE)
        record[0] = (t, population, sign)
        self._handle.write(record.tobytes())
        self.count += 1


def read_event_log(path: Union[str, Path]) -> np.ndarray:
    """Structured array with fields t, population, sign."""
    return np.fromfile(path, dtype=EVENT_DTYPE)


@dataclass
class LockstepResult:
    """
    Raw output of the lockstep engine.

    Attributes:
        samples: Counts on the output grid, shape (P, G, M)
        final_counts: Counts at the end, shape (P, M)
        events: Events fired per path
        absorbed: Paths that reached a state with no possible transition
        count_min: Smallest count seen per population
        count_max: Largest count seen per population
    """

    samples: np.ndarray
    final_counts: np.ndarray
    events: np.ndarray
    absorbed: np.ndarray
    count_min: np.ndarray
    count_max: np.ndarray


def run_lockstep(
    net: NetworkConfig,
    init: np.ndarray,
    times: np.ndarray,
    draws: UniformBuffer,
    event_log: Optional[EventLog] = None,
) -> LockstepResult:
    """
    Advance P paths to times[-1] and sample them on ``times``.

    Args:
        net: Network parameters
        init: Initial counts, shape (P, M)
        times: Increasing grid starting at 0
        draws: Uniform pairs for the P paths
        event_log: Optional log (single-path runs only)
    """
    n = np.array(init, dtype=np.int64)
    P, M = n.shape
    G = len(times)
    t_end = float(times[-1])
    t = np.zeros(P)
    next_sample = np.zeros(P, dtype=np.int64)
    samples = np.empty((P, G, M), dtype=np.int64)
    events = np.zeros(P, dtype=np.int64)
    absorbed = np.zeros(P, dtype=bool)
    active = np.ones(P, dtype=bool)
    count_min, count_max = n.min(axis=0), n.max(axis=0)
    if event_log is not None and P != 1:
        raise ConfigurationError("Event logs are written for single-path runs")

    while np.any(active):
        rows = np.nonzero(active)[0]
        rates = rate_table(n[rows], net)
        total = rates.sum(axis=1)
        u = draws.pairs(rows)
        dead = total <= 0
        tau = np.where(dead, np.inf, -np.log1p(-u[:, 0]) / np.where(dead, 1.0, total))
        t_new = t[rows] + tau

        # grid times before the jump see the pre-jump state
        while True:
            g = next_sample[rows]
            pending = (g < G) & (times[np.minimum(g, G - 1)] < t_new)
            if not np.any(pending):
                break
            hit = rows[pending]
            samples[hit, next_sample[hit]] = n[hit]
            next_sample[hit] += 1

        fires = ~dead & (t_new <= t_end)
        if np.any(fires):
            firing = rows[fires]
            channel = choose_channel(rates[fires], u[fires, 1])
            population = channel % M
            sign = np.where(channel < M, -1, 1)
            n[firing, population] += sign
            events[firing] += 1
            count_min = np.minimum(count_min, n[firing].min(axis=0))
            count_max = np.maximum(count_max, n[firing].max(axis=0))
            if event_log is not None:
                event_log.write(float(t_new[fires][0]), int(population[0]), int(sign[0]))
        t[rows] = t_new
        absorbed[rows[dead]] = True
        active[rows[~fires]] = False

    return LockstepResult(samples, n, events, absorbed, count_min, count_max)


def initial_counts(init: Union[MarkovState, np.ndarray, Sequence[int]], net: NetworkConfig, paths: int) -> np.ndarray:
    """Broadcast an initial state to (paths, M) counts and check the bounds."""
    counts = init.n if isinstance(init, MarkovState) else np.asarray(init, dtype=np.int64)
    counts = np.broadcast_to(counts, (paths, net.M)).astype(np.int64)
    for row in counts:
        MarkovState(row).check_bounds(net.discrete_sizes)
    return counts


@dataclass
class SamplePath:
    """
    One simulated path.

    Attributes:
        times: Output grid
        counts: Counts on the grid, shape (G, M)
        final: State after the last event before the end time
        events: Number of events
        absorbed: True if the path got stuck in an absorbing state
    """

    times: np.ndarray
    counts: np.ndarray
    final: MarkovState
    events: int
    absorbed: bool

    def proportions(self, net: NetworkConfig) -> np.ndarray:
        return self.counts / net.discrete_sizes


def simulate_path(
    net: NetworkConfig,
    init: Union[MarkovState, np.ndarray, Sequence[int]],
    t_end: float,
    seed: Optional[int] = None,
    path: int = 0,
    stream_key: Sequence[int] = (),
    n_points: int = DEFAULT_GRID_POINTS,
    event_log: Optional[EventLog] = None,
) -> SamplePath:
    """
    Simulate a single path exactly.

    The path uses the same stream as path ``path`` of ``run_ensemble`` with
    the same seed, so the two agree event for event.
    """
    if not t_end > 0:
        raise ConfigurationError(f"t_end must be positive, got {t_end}")
    seed = resolve_seed(seed)
    times = np.linspace(0.0, t_end, n_points)
    draws = UniformBuffer([path_generator(seed, path, stream_key)])
    result = run_lockstep(net, initial_counts(init, net, 1), times, draws, event_log)
    if result.absorbed[0]:
        logger.info(f"Path {path} reached an absorbing state after {int(result.events[0])} events")
    return SamplePath(
        times,
        result.samples[0],
        MarkovState(result.final_counts[0], t_end, bool(result.absorbed[0])),
        int(result.events[0]),
        bool(result.absorbed[0]),
    )
