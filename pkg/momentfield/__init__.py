"""
momentfield - moment systems and Markov models of stochastic neural populations.

Example usage:
    from momentfield import load_network, integrate, find_fixed_points, run_ensemble
    from momentfield import ModelVariant, MomentState

    net = load_network("model1.json", ["I1=-0.5"])
    traj = integrate(ModelVariant.WILSON_COWAN, MomentState.zeros(net.M, "wc"), net, 200.0)
    points = find_fixed_points("bcc", net.with_param("N", 50))

    stats = run_ensemble(net.with_param("N", 10000), [0, 0], t_end=50.0, paths=200, seed=1)
"""

__version__ = "0.1.0"
__license__ = "MIT"

from momentfield.models import MarkovState, ModelVariant, MomentState, NetworkConfig, UpRateMode
from momentfield.activation import ActivationFunction, ActivationKind
from momentfield.config import SolverControls, configure_logging, load_network
from momentfield.exceptions import (
    ConfigurationError,
    CycleNotFoundError,
    EvaluationError,
    IntegrationError,
    ModelError,
    MomentFieldError,
    NotAHopfCandidateError,
    OrbitClosureError,
    StateSpaceTooLargeError,
)
from momentfield.systems import rhs
from momentfield.integrate import LimitCycle, Trajectory, find_cycle, integrate, monodromy, poincare_map
from momentfield.steady_state import FixedPoint, find_fixed_points, hopf_genericity
from momentfield.bifurcation import (
    BifurcationAtlas,
    ParameterAxis,
    continue_codim2,
    hysteresis_sweep,
    sweep_cycles,
    sweep_equilibria,
)
from momentfield.stochastic import (
    EnsembleStats,
    gillespie_step,
    langevin_run,
    master_evolve,
    power_spectrum,
    run_ensemble,
    transition_rates,
)

__all__ = [
    "ActivationFunction",
    "ActivationKind",
    "BifurcationAtlas",
    "ConfigurationError",
    "CycleNotFoundError",
    "EnsembleStats",
    "EvaluationError",
    "FixedPoint",
    "IntegrationError",
    "LimitCycle",
    "MarkovState",
    "ModelError",
    "ModelVariant",
    "MomentFieldError",
    "MomentState",
    "NetworkConfig",
    "NotAHopfCandidateError",
    "OrbitClosureError",
    "ParameterAxis",
    "SolverControls",
    "StateSpaceTooLargeError",
    "Trajectory",
    "UpRateMode",
    "configure_logging",
    "continue_codim2",
    "find_cycle",
    "find_fixed_points",
    "gillespie_step",
    "hopf_genericity",
    "hysteresis_sweep",
    "integrate",
    "langevin_run",
    "load_network",
    "master_evolve",
    "monodromy",
    "poincare_map",
    "power_spectrum",
    "rhs",
    "run_ensemble",
    "sweep_cycles",
    "sweep_equilibria",
    "transition_rates",
    "__version__",
]
