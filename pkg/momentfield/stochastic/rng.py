"""
Per-path random streams.

Every sample path owns a counter-based Philox stream keyed by
(seed, *stream_key, path). Results therefore do not depend on how paths
are split across workers.
"""
from typing import Sequence, Tuple

import numpy as np

DEFAULT_BLOCK = 1024


def path_generator(seed: int, path: int, stream_key: Sequence[int] = ()) -> np.random.Generator:
    """Generator for one path."""
    sequence = np.random.SeedSequence(int(seed), spawn_key=(*map(int, stream_key), int(path)))
    return np.random.Generator(np.random.Philox(sequence))


def path_generators(seed: int, paths: Sequence[int], stream_key: Sequence[int] = ()) -> Tuple[np.random.Generator, ...]:
    return tuple(path_generator(seed, p, stream_key) for p in paths)


class UniformBuffer:
    """
    Block-buffered uniform pairs for a set of paths.

    Each call to ``pairs`` consumes exactly two uniforms from every requested
    path's stream, in stream order.
    """

    def __init__(self, generators: Sequence[np.random.Generator], block: int = DEFAULT_BLOCK):
        if block % 2:
            raise ValueError("block must be even")
        self.generators = list(generators)
        self.block = block
        self.buffer = np.empty((len(self.generators), block))
        self.position = np.full(len(self.generators), block, dtype=np.int64)

    def _refill(self, rows: np.ndarray) -> None:
        for r in rows:
            self.buffer[r] = self.generators[r].random(self.block)
            self.position[r] = 0

    def pairs(self, rows: np.ndarray) -> np.ndarray:
        """Next (u1, u2) for each row, shape (len(rows), 2)."""
        exhausted = rows[self.position[rows] >= self.block]
        if exhausted.size:
            self._refill(exhausted)
        pos = self.position[rows]
        out = np.stack([self.buffer[rows, pos], self.buffer[rows, pos + 1]], axis=1)
        self.position[rows] += 2
        return out


class NormalBuffer:
    """Block-buffered standard normal vectors of length M for a set of paths."""

    def __init__(self, generators: Sequence[np.random.Generator], M: int, block: int = 256):
        self.generators = list(generators)
        self.block = block
        self.buffer = np.empty((len(self.generators), block, M))
        self.position = block

    def draw(self) -> np.ndarray:
        """Next normal vector for every path, shape (paths, M)."""
        if self.position >= self.block:
            for r, gen in enumerate(self.generators):
                self.buffer[r] = gen.standard_normal(self.buffer.shape[1:])
            self.position = 0
        out = self.buffer[:, self.position]
        self.position += 1
        return out
