"""
Result persistence: CSV tables, JSON reports, gnuplot branch files and run manifests.

Every float is written with 17 significant digits so that values read back
compare equal to the ones computed. Each output directory holds exactly one
``manifest.json`` listing the command, the resolved configuration, the seeds
and a sha256 digest of every file written next to it.
"""
import csv
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import numpy as np

from momentfield import __version__
from momentfield.bifurcation import BifurcationAtlas, HysteresisResult
from momentfield.exceptions import ConfigurationError
from momentfield.integrate import Trajectory
from momentfield.models import state_labels
from momentfield.steady_state import FixedPoint
from momentfield.stochastic.ensemble import EnsembleStats
from momentfield.stochastic.spectrum import PowerSpectrum

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
MANIFEST_NAME = "manifest.json"

PathLike = Union[str, Path]


def fmt(value: Any) -> str:
    """Format one cell; floats get 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % float(value)
    return str(value)


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write a table with a header row and return its path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    logger.debug(f"Wrote {path}")
    return path


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_json(path: PathLike, data: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, default=_json_default)
        f.write("\n")
    logger.debug(f"Wrote {path}")
    return path


# ========== Tables ==========


def trajectory_header(M: int, with_corr: bool) -> List[str]:
    """``t,nu_1..nu_M,corr_11,corr_12,...`` (upper triangle, row-major)."""
    return ["t"] + state_labels(M, with_corr)


def write_trajectory(path: PathLike, traj: Trajectory) -> Path:
    header = trajectory_header(traj.M, traj.variant.has_correlations)
    rows = (np.concatenate([[t], y]) for t, y in zip(traj.times, traj.states))
    return write_csv(path, header, rows)


def ensemble_header(M: int) -> List[str]:
    """``t,nu_1..nu_M,C_11,C_12,...`` with the raw second moments over the upper triangle."""
    rows, cols = np.triu_indices(M)
    return ["t"] + [f"nu_{i + 1}" for i in range(M)] + [f"C_{i + 1}{j + 1}" for i, j in zip(rows, cols)]


def write_ensemble(path: PathLike, stats: EnsembleStats) -> Path:
    rows, cols = np.triu_indices(stats.M)
    table = np.column_stack([stats.times, stats.mean, stats.second[:, rows, cols]])
    return write_csv(path, ensemble_header(stats.M), table)


def spectrum_header(M: int) -> List[str]:
    return ["frequency"] + [f"power_{i + 1}" for i in range(M)]


def write_spectrum(path: PathLike, spectrum: PowerSpectrum) -> Path:
    table = np.column_stack([spectrum.frequencies, spectrum.power])
    return write_csv(path, spectrum_header(spectrum.power.shape[1]), table)


def write_hysteresis(path: PathLike, result: HysteresisResult) -> Path:
    M = result.up.shape[1]
    header = (
        [result.parameter]
        + [f"up_nu_{i + 1}" for i in range(M)]
        + [f"down_nu_{i + 1}" for i in range(M)]
        + ["up_oscillating", "down_oscillating", "bistable"]
    )
    bistable = result.separation > result.threshold
    rows = (
        [v, *up, *down, uo, do, b]
        for v, up, down, uo, do, b in zip(
            result.values, result.up, result.down, result.up_oscillating, result.down_oscillating, bistable
        )
    )
    return write_csv(path, header, rows)


def write_fixed_points(path: PathLike, points: Sequence[FixedPoint]) -> Path:
    """JSON list of {state, eigenvalues as [re, im] pairs, class, admissible}."""
    return write_json(path, [p.to_dict() for p in points])


# ========== Atlas ==========


def write_atlas(directory: PathLike, atlas: BifurcationAtlas, stem: str = "atlas") -> List[Path]:
    """
    Write an atlas as JSON, one CSV polyline per branch or curve, and gnuplot data.

    Branch CSVs hold the parameter, the flat state, the stability and the
    admissibility per point. Curve CSVs hold the two parameters and the
    admissibility. The ``.dat`` files carry the same columns separated by
    spaces with blank lines between polylines, ready for ``plot ... with lines``.

    Returns:
        All files written
    """
    directory = Path(directory)
    written = [write_json(directory / f"{stem}.json", atlas.to_dict())]
    with_corr = atlas.variant.has_correlations
    branch_blocks: List[List[List[str]]] = []
    for k, branch in enumerate(atlas.branches, 1):
        if len(branch) == 0:
            continue
        M = _state_size_to_m(branch.states.shape[1], with_corr)
        header = [branch.parameter] + state_labels(M, with_corr) + ["stability", "admissible"]
        rows = [
            [v, *y, s, a] for v, y, s, a in zip(branch.values, branch.states, branch.stability, branch.admissible)
        ]
        written.append(write_csv(directory / f"{stem}_branch_{k}.csv", header, rows))
        branch_blocks.append([[fmt(r[0]), *(fmt(x) for x in r[1:-2])] for r in rows])
    curve_blocks: List[List[List[str]]] = []
    for k, curve in enumerate(atlas.curves, 1):
        name = curve.label or curve.kind.value
        header = list(curve.plane) + ["admissible"]
        rows = [[p[0], p[1], a] for p, a in zip(curve.points, curve.admissible)]
        written.append(write_csv(directory / f"{stem}_curve_{k}_{name}.csv", header, rows))
        curve_blocks.append([[fmt(p[0]), fmt(p[1])] for p in curve.points])
    if branch_blocks:
        written.append(_write_gnuplot(directory / f"{stem}_branches.dat", branch_blocks))
    if curve_blocks:
        written.append(_write_gnuplot(directory / f"{stem}_curves.dat", curve_blocks))
    if atlas.points:
        point_rows = [[fmt(v) for v in p.parameters.values()] + [p.label or p.kind.value] for p in atlas.points]
        written.append(_write_gnuplot(directory / f"{stem}_points.dat", [point_rows]))
    return written


def _state_size_to_m(size: int, with_corr: bool) -> int:
    for M in range(1, size + 1):
        if size == (M + M * (M + 1) // 2 if with_corr else M):
            return M
    raise ConfigurationError(f"State size {size} matches no population count")


def _write_gnuplot(path: Path, blocks: Sequence[Sequence[Sequence[str]]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for block in blocks:
            for row in block:
                f.write(" ".join(row) + "\n")
            f.write("\n")
    return path


# ========== Manifest ==========


def sha256_file(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """
    Provenance of one command run.

    Attributes:
        command: Subcommand and its arguments
        config: Fully resolved network configuration
        seeds: Seeds used (empty for deterministic commands)
        version: Package version
        wall_clock: Seconds spent in the command
        digests: sha256 per output file name
        options: Resolved command options
    """

    command: List[str]
    config: Dict[str, Any]
    seeds: List[int] = field(default_factory=list)
    version: str = __version__
    wall_clock: float = 0.0
    digests: Dict[str, str] = field(default_factory=dict)
    options: Dict[str, Any] = field(default_factory=dict)

    def record(self, paths: Iterable[PathLike]) -> None:
        """Add the digests of output files."""
        for path in paths:
            path = Path(path)
            self.digests[path.name] = sha256_file(path)

    def verify(self, directory: PathLike) -> List[str]:
        """Names of files whose digest no longer matches (or that are missing)."""
        directory = Path(directory)
        stale = []
        for name, digest in self.digests.items():
            target = directory / name
            if not target.exists() or sha256_file(target) != digest:
                stale.append(name)
        return stale

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": list(self.command),
            "config": self.config,
            "seeds": list(self.seeds),
            "version": self.version,
            "wall_clock": self.wall_clock,
            "digests": dict(sorted(self.digests.items())),
            "options": self.options,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunManifest":
        return cls(
            command=list(data["command"]),
            config=dict(data["config"]),
            seeds=[int(s) for s in data.get("seeds", [])],
            version=data.get("version", ""),
            wall_clock=float(data.get("wall_clock", 0.0)),
            digests=dict(data.get("digests", {})),
            options=dict(data.get("options", {})),
        )

    def write(self, directory: PathLike) -> Path:
        """Write ``manifest.json``, replacing any earlier manifest in the directory."""
        return write_json(Path(directory) / MANIFEST_NAME, self.to_dict())

    @classmethod
    def read(cls, directory: PathLike) -> "RunManifest":
        with open(Path(directory) / MANIFEST_NAME, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def __repr__(self) -> str:
        return f"RunManifest({' '.join(self.command[:1])}, files={len(self.digests)})"


class ManifestTimer:
    """Context manager measuring the wall clock of a command into a manifest."""

    def __init__(self, manifest: RunManifest):
        self.manifest = manifest
        self._start = 0.0

    def __enter__(self) -> RunManifest:
        self._start = time.perf_counter()
        return self.manifest

    def __exit__(self, exc_type, exc, tb) -> None:
        self.manifest.wall_clock = time.perf_counter() - self._start


def finish_run(directory: PathLike, manifest: RunManifest, outputs: Sequence[PathLike]) -> Path:
    """Digest the outputs and write the directory's manifest."""
    manifest.record(outputs)
    path = manifest.write(directory)
    logger.info(f"Wrote {len(outputs)} file(s) and {path}")
    return path


def read_csv(path: PathLike) -> Dict[str, np.ndarray]:
    """Numeric columns of a CSV written by this module, keyed by header name."""
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [row for row in reader]
    columns: Dict[str, np.ndarray] = {}
    for k, name in enumerate(header):
        values = [row[k] for row in rows]
        try:
            columns[name] = np.array([float(v) for v in values])
        except ValueError:
            columns[name] = np.array(values)
    return columns

