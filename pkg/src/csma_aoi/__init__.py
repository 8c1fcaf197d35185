"""Age of information in CSMA-type dense IoT networks: closed forms, the
mean-field limit, the waiting-rate mean-field game, and simulators."""
from .analytic import AoiPair, aoi, attempt_energy_cost, effective_rate, energy_cost
from .game import (IterationTrace, MfeCase, MfeOutcome, Terminal, best_response, classify_mfe,
                   convergence_condition, fixed_point_iterate, sensitivity, theta_star)
from .meanfield import (IntegrationError, Trajectory, drift, equilibrium, integrate,
                        stability_rate)
from .model import INFINITY, DomainError, MeanFieldState, Scheme, SystemParams, validate

__version__ = "0.1.0"

__all__ = [
    "INFINITY", "AoiPair", "DomainError", "IntegrationError", "IterationTrace", "MeanFieldState",
    "MfeCase", "MfeOutcome", "Scheme", "SystemParams", "Terminal", "Trajectory", "aoi",
    "attempt_energy_cost", "best_response", "classify_mfe", "convergence_condition", "drift",
    "effective_rate", "energy_cost", "equilibrium", "fixed_point_iterate", "integrate",
    "sensitivity", "stability_rate", "theta_star", "validate",
]
