"""Delay-Doppler radar sensing with OTFS frames: simulation, GLRT and 2-D FFT receivers, CFAR and Monte Carlo tooling."""

__version__ = "0.1.0"

from .params import OtfsParams, derive_limits, load_params
from .experiments import Scenario, load_scenario, run_sweep, run_trial

__all__ = [
    "OtfsParams",
    "Scenario",
    "derive_limits",
    "load_params",
    "load_scenario",
    "run_sweep",
    "run_trial",
]
