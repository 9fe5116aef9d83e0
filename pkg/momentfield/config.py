"""
Configuration: network files, solver controls, logging, seeds and workers.

Network files are JSON or YAML. Values given on the command line override the
file, which overrides the defaults.
"""
import json
import logging
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

import yaml

from momentfield.exceptions import ConfigurationError
from momentfield.models import NetworkConfig

logger = logging.getLogger(__name__)

CONFIG_DIR = Path(__file__).parent / "configs"
SEED_ENV_VAR = "MOMENTFIELD_SEED"
DEFAULT_SEED = 12345
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


@dataclass(frozen=True)
class SolverControls:
    """
    Tolerances of the adaptive Runge-Kutta integrator.

    Attributes:
        rtol: Relative tolerance
        atol: Absolute tolerance
        max_step: Largest step (inf for no limit)
        first_step: Optional first step
    """

    rtol: float = 1e-8
    atol: float = 1e-10
    max_step: float = float("inf")
    first_step: Optional[float] = None

    def scaled(self, factor: float) -> "SolverControls":
        """Controls with both tolerances multiplied by factor."""
        return SolverControls(self.rtol * factor, self.atol * factor, self.max_step, self.first_step)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def configure_logging(level: str = "INFO") -> None:
    """Configure root logging the same way for every entry point."""
    level_num = getattr(logging, str(level).upper(), logging.INFO)
    logging.basicConfig(level=level_num, format=LOG_FORMAT)
    logging.getLogger("momentfield").setLevel(level_num)


def resolve_config_path(path: Union[str, Path]) -> Path:
    """Accept a file path or the name of a bundled config (``model1.json``)."""
    candidate = Path(path)
    if candidate.exists():
        return candidate
    bundled = CONFIG_DIR / candidate.name
    if bundled.exists():
        return bundled
    raise ConfigurationError(f"Config file not found: {path}")


def parse_network_text(text: str, suffix: str = ".json") -> Dict[str, Any]:
    """
    Parse network-file text into a dictionary.

    Raises:
        ConfigurationError: With line and column of the first syntax error
    """
    if suffix.lower() in (".yaml", ".yml"):
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            line = mark.line + 1 if mark is not None else None
            column = mark.column + 1 if mark is not None else None
            raise ConfigurationError(f"Malformed YAML network file: {e}", line, column) from e
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Malformed JSON network file: {e.msg}", e.lineno, e.colno) from e
    if not isinstance(data, dict):
        raise ConfigurationError("A network file must hold a mapping at the top level")
    return data


def load_network(path: Union[str, Path], overrides: Optional[Iterable[str]] = None) -> NetworkConfig:
    """
    Load a network file and apply ``name=value`` parameter overrides.

    Args:
        path: JSON or YAML file, or the name of a bundled config
        overrides: Strings like ``I1=-2.0`` or ``N=500``

    Returns:
        NetworkConfig
    """
    resolved = resolve_config_path(path)
    logger.debug(f"Loading network from {resolved}")
    data = parse_network_text(resolved.read_text(), resolved.suffix)
    net = NetworkConfig.from_dict(data)
    return apply_overrides(net, overrides or ())


def apply_overrides(net: NetworkConfig, overrides: Iterable[str]) -> NetworkConfig:
    for item in overrides:
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationError(f"Overrides are written name=value, got {item!r}")
        try:
            number = float(value)
        except ValueError as e:
            raise ConfigurationError(f"Override {item!r} needs a numeric value") from e
        net = net.with_param(name.strip(), number)
        logger.debug(f"Override {name.strip()} = {number}")
    return net


def resolve_seed(seed: Optional[int] = None) -> int:
    """Flag value, else the MOMENTFIELD_SEED environment variable, else the default."""
    if seed is not None:
        return int(seed)
    env = os.environ.get(SEED_ENV_VAR)
    if env:
        try:
            return int(env)
        except ValueError as e:
            raise ConfigurationError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from e
    return DEFAULT_SEED


def resolve_workers(workers: Optional[int] = None) -> int:
    """Requested worker count, defaulting to the available parallelism."""
    if workers is None:
        return os.cpu_count() or 1
    if workers < 1:
        raise ConfigurationError(f"--workers must be at least 1, got {workers}")
    return int(workers)
