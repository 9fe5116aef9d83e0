"""
Markov-chain tools: exact Gillespie paths and ensembles, the master equation
for small networks, Langevin ensembles and averaged power spectra.
"""
from momentfield.stochastic.ensemble import EnsembleStats, run_ensemble
from momentfield.stochastic.gillespie import (
    EVENT_DTYPE,
    EventLog,
    SamplePath,
    choose_channel,
    gillespie_step,
    read_event_log,
    simulate_path,
)
from momentfield.stochastic.langevin import langevin_run
from momentfield.stochastic.master import MasterSolution, generator_matrix, master_evolve, state_space
from momentfield.stochastic.rates import rate_table, transition_rates
from momentfield.stochastic.rng import path_generator
from momentfield.stochastic.spectrum import PowerSpectrum, SpectralPeak, power_spectrum, spectral_peak

__all__ = [
    "EVENT_DTYPE",
    "EnsembleStats",
    "EventLog",
    "MasterSolution",
    "PowerSpectrum",
    "SamplePath",
    "SpectralPeak",
    "choose_channel",
    "generator_matrix",
    "gillespie_step",
    "langevin_run",
    "master_evolve",
    "path_generator",
    "power_spectrum",
    "rate_table",
    "read_event_log",
    "run_ensemble",
    "simulate_path",
    "spectral_peak",
    "state_space",
    "transition_rates",
]
