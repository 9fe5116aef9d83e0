"""
Monte-Carlo ensembles of the Markov model and their statistics.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from momentfield.config import resolve_seed
from momentfield.exceptions import ConfigurationError
from momentfield.models import MarkovState, NetworkConfig
from momentfield.stochastic.gillespie import DEFAULT_GRID_POINTS, initial_counts, run_lockstep
from momentfield.stochastic.rng import UniformBuffer, path_generators

logger = logging.getLogger(__name__)


@dataclass
class EnsembleStats:
    """
    Statistics of an ensemble of sample paths on a uniform grid.

    Attributes:
        times: Output grid
        mean: nu_i = <n_i> / N_i per time, shape (G, M)
        second: C_ij = <n_i n_j> / (N_i N_j) per time, shape (G, M, M)
        paths: Number of paths
        seed: Seed the per-path streams were derived from
        samples: Per-path proportions, shape (P, G, M)
        final_counts: Counts at the end time (Markov runs), shape (P, M)
        flagged: Paths flagged during the run (absorbed or negative radicand)
        events: Total number of events (Markov runs)
        count_min: Smallest count seen per population (Markov runs)
        count_max: Largest count seen per population (Markov runs)
        method: "gillespie" or "langevin"
        stream_key: Extra key of the per-path streams
    """

    times: np.ndarray
    mean: np.ndarray
    second: np.ndarray
    paths: int
    seed: int
    samples: np.ndarray
    final_counts: Optional[np.ndarray] = None
    flagged: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    events: int = 0
    count_min: Optional[np.ndarray] = None
    count_max: Optional[np.ndarray] = None
    method: str = "gillespie"
    stream_key: Tuple[int, ...] = ()

    @classmethod
    def from_samples(cls, times: np.ndarray, samples: np.ndarray, seed: int, **extra: Any) -> "EnsembleStats":
        """Statistics of (P, G, M) proportion samples; reductions run in path order."""
        samples = np.asarray(samples, dtype=float)
        mean = samples.mean(axis=0)
        second = np.einsum("pgi,pgj->gij", samples, samples) / samples.shape[0]
        return cls(np.asarray(times), mean, second, samples.shape[0], seed, samples, **extra)

    @property
    def M(self) -> int:
        return self.mean.shape[1]

    @property
    def covariance(self) -> np.ndarray:
        """C_ij - nu_i nu_j per time."""
        return self.second - self.mean[:, :, None] * self.mean[:, None, :]

    def _require_paths(self) -> None:
        if self.paths < 2:
            raise ConfigurationError("Standard errors need at least two paths")

    @property
    def mean_stderr(self) -> np.ndarray:
        """Monte-Carlo standard error of ``mean``."""
        self._require_paths()
        return self.samples.std(axis=0, ddof=1) / np.sqrt(self.paths)

    @property
    def second_stderr(self) -> np.ndarray:
        """Monte-Carlo standard error of ``second``."""
        self._require_paths()
        products = self.samples[:, :, :, None] * self.samples[:, :, None, :]
        return products.std(axis=0, ddof=1) / np.sqrt(self.paths)

    def index_of(self, time: float) -> int:
        """Grid index closest to ``time``."""
        return int(np.argmin(np.abs(self.times - time)))

    def settled(self, fraction: float = 0.25) -> Tuple[np.ndarray, np.ndarray]:
        """Time-averaged mean and covariance over the trailing fraction of the grid."""
        start = int(len(self.times) * (1.0 - fraction))
        return self.mean[start:].mean(axis=0), self.covariance[start:].mean(axis=0)

    def summary(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "paths": self.paths,
            "seed": self.seed,
            "stream_key": list(self.stream_key),
            "grid_points": len(self.times),
            "events": self.events,
            "flagged_paths": int(np.sum(self.flagged)),
        }

    def __repr__(self) -> str:
        return f"EnsembleStats({self.method}, paths={self.paths}, M={self.M}, grid={len(self.times)})"


def _chunks(paths: int, workers: int) -> Sequence[np.ndarray]:
    return [c for c in np.array_split(np.arange(paths), max(1, min(workers, paths))) if c.size]


def run_ensemble(
    net: NetworkConfig,
    init: Union[MarkovState, np.ndarray, Sequence[int]],
    t_end: float,
    paths: int,
    seed: Optional[int] = None,
    n_points: int = DEFAULT_GRID_POINTS,
    workers: int = 1,
    stream_key: Sequence[int] = (),
) -> EnsembleStats:
    """
    Simulate independent sample paths and collect their statistics.

    Path k draws from the stream (seed, *stream_key, k) whatever the worker
    count, and chunks are merged in path order, so the statistics are
    bit-identical for identical (seed, paths, grid).

    Args:
        net: Network with finite population sizes
        init: Initial counts, one state for all paths or one row per path
        t_end: Final time
        paths: Number of paths (>= 1)
        seed: Base seed (default from MOMENTFIELD_SEED or the built-in default)
        n_points: Uniform output grid size
        workers: Threads sharing the paths
        stream_key: Extra stream key, e.g. the step index of a sweep

    Returns:
        EnsembleStats
    """
    if paths < 1:
        raise ConfigurationError(f"paths must be at least 1, got {paths}")
    if not t_end > 0:
        raise ConfigurationError(f"t_end must be positive, got {t_end}")
    seed = resolve_seed(seed)
    stream_key = tuple(int(k) for k in stream_key)
    counts = initial_counts(init, net, paths)
    times = np.linspace(0.0, t_end, n_points)

    def simulate(chunk: np.ndarray):
        draws = UniformBuffer(path_generators(seed, chunk, stream_key))
        return run_lockstep(net, counts[chunk], times, draws)

    chunks = _chunks(paths, workers)
    logger.debug(f"Running {paths} Gillespie paths to t={t_end} on {len(chunks)} worker(s)")
    if len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=len(chunks)) as executor:
            results = list(executor.map(simulate, chunks))
    else:
        results = [simulate(c) for c in chunks]

    sizes = net.discrete_sizes
    samples = np.concatenate([r.samples for r in results]) / sizes
    absorbed = np.concatenate([r.absorbed for r in results])
    stats = EnsembleStats.from_samples(
        times,
        samples,
        seed,
        final_counts=np.concatenate([r.final_counts for r in results]),
        flagged=absorbed,
        events=int(sum(int(r.events.sum()) for r in results)),
        count_min=np.min([r.count_min for r in results], axis=0),
        count_max=np.max([r.count_max for r in results], axis=0),
        method="gillespie",
        stream_key=stream_key,
    )
    if np.any(absorbed):
        logger.info(f"{int(absorbed.sum())} of {paths} paths reached an absorbing state")
    logger.info(f"Ensemble finished: {stats}, {stats.events} events")
    return stats
