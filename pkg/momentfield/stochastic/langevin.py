"""
Euler-Maruyama ensembles of the Langevin approximation

    dX_i = (-alpha_i X_i + f_i(s_i(X))) dt + eps_i sqrt(alpha_i X_i + f_i(s_i(X))) dW_i

with eps_i = n_i ** noise_exponent, the same amplitude the moment system of
this approximation uses.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence, Union

import numpy as np

from momentfield.config import resolve_seed
from momentfield.exceptions import ConfigurationError
from momentfield.models import NetworkConfig
from momentfield.stochastic.ensemble import EnsembleStats
from momentfield.stochastic.rng import NormalBuffer, path_generators
from momentfield.systems.rodriguez_tuckwell import noise_amplitude

logger = logging.getLogger(__name__)

# Paths whose radicand stays negative this many consecutive steps are flagged
NEGATIVE_RADICAND_STEPS = 10


def _euler_maruyama(net, X0, dt, steps, stride, normals: Optional[NormalBuffer]):
    X = np.array(X0, dtype=float)
    eps = noise_amplitude(net)
    records = [X.copy()]
    streak = np.zeros(X.shape, dtype=np.int64)
    flagged = np.zeros(X.shape[0], dtype=bool)
    sqrt_dt = math.sqrt(dt)
    for k in range(1, steps + 1):
        f = net.activation(net.total_current(X))
        drift = -net.alpha * X + f
        radicand = net.alpha * X + f
        negative = radicand < 0
        streak = np.where(negative, streak + 1, 0)
        flagged |= np.any(streak >= NEGATIVE_RADICAND_STEPS, axis=1)
        X = X + drift * dt
        if normals is not None:
            X = X + eps * np.sqrt(np.maximum(radicand, 0.0)) * normals.draw() * sqrt_dt
        if k % stride == 0:
            records.append(X.copy())
    return np.stack(records, axis=1), flagged


def langevin_run(
    net: NetworkConfig,
    init: Union[np.ndarray, Sequence[float]],
    t_end: float,
    dt: float = 1e-2,
    paths: int = 100,
    seed: Optional[int] = None,
    n_points: int = 501,
    workers: int = 1,
    stream_key: Sequence[int] = (),
) -> EnsembleStats:
    """
    Simulate the Langevin approximation by Euler-Maruyama.

    The square root is taken of max(radicand, 0); paths where the radicand
    stays negative are flagged, not stopped.

    Args:
        net: Network parameters (noise_exponent sets the amplitude; inf gives ODE paths)
        init: Initial activities, shape (M,) or (paths, M)
        t_end: Final time
        dt: Step (shrunk so that t_end is a whole number of steps)
        paths: Number of paths
        seed: Base seed of the per-path streams
        n_points: Approximate number of output points
        workers: Threads sharing the paths
        stream_key: Extra stream key

    Returns:
        EnsembleStats with method "langevin"
    """
    if paths < 1 or not t_end > 0 or not dt > 0:
        raise ConfigurationError("langevin_run needs paths >= 1, t_end > 0 and dt > 0")
    seed = resolve_seed(seed)
    stream_key = tuple(int(k) for k in stream_key)
    steps = int(math.ceil(t_end / dt))
    dt = t_end / steps
    stride = max(1, steps // max(1, n_points - 1))
    X0 = np.broadcast_to(np.asarray(init, dtype=float), (paths, net.M))
    noisy = bool(np.any(noise_amplitude(net) > 0))

    def simulate(chunk: np.ndarray):
        normals = NormalBuffer(path_generators(seed, chunk, stream_key), net.M) if noisy else None
        return _euler_maruyama(net, X0[chunk], dt, steps, stride, normals)

    chunks = [c for c in np.array_split(np.arange(paths), max(1, min(workers, paths))) if c.size]
    if len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=len(chunks)) as executor:
            results = list(executor.map(simulate, chunks))
    else:
        results = [simulate(c) for c in chunks]

    samples = np.concatenate([r[0] for r in results])
    flagged = np.concatenate([r[1] for r in results])
    times = np.arange(samples.shape[1]) * stride * dt
    if np.any(flagged):
        logger.warning(f"{int(flagged.sum())} Langevin paths kept a negative diffusion radicand")
    stats = EnsembleStats.from_samples(
        times, samples, seed, flagged=flagged, method="langevin", stream_key=stream_key
    )
    logger.info(f"Langevin run finished: {stats} (dt={dt:.3g})")
    return stats
