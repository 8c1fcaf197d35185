"""Stochastic simulators used to validate the closed forms."""
from .density import density_mean_trajectory, simulate_density, stationary_density
from .device import device_logs, simulate_device, stats_from_log
from .population import (CapacityError, ConvergenceRow, Estimate, PopulationRun,
                         PopulationSummary, estimate_rate_of_convergence,
                         replicate_population, simulate_population)
from .records import AoiStats, DeliveryLog

__all__ = [
    "AoiStats", "CapacityError", "ConvergenceRow", "DeliveryLog", "Estimate",
    "PopulationRun", "PopulationSummary", "density_mean_trajectory", "device_logs",
    "estimate_rate_of_convergence", "replicate_population", "simulate_density",
    "simulate_device", "simulate_population", "stationary_density", "stats_from_log",
]
