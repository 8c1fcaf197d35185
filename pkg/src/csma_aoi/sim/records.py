"""Result containers shared by the simulators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AoiStats:
    """Empirical AoI statistics of one run (or pooled over devices).

    ``energy_rate`` bills sensing per unit of waiting time;
    ``attempt_energy_rate`` (population runs only) bills it per sensing
    attempt.
    """

    time_avg_aoi: float
    mean_peak_aoi: float
    delivered_count: int
    mean_service_time: float
    mean_interdeparture: float
    second_moment_interdeparture: float
    energy_rate: float
    observation_span: float
    attempt_energy_rate: float | None = None


@dataclass(frozen=True)
class DeliveryLog:
    """Per-delivery record of a single-device run.

    Index j is the j-th delivered update: it was generated at
    ``generation[j]`` and delivered at ``delivery[j]``; the device waited in
    [wait_start[j], wait_end[j]) and transmitted in [wait_end[j], delivery[j]).
    """

    generation: np.ndarray
    delivery: np.ndarray
    wait_start: np.ndarray
    wait_end: np.ndarray

    def __len__(self) -> int:
        return len(self.delivery)

    @property
    def service_time(self) -> np.ndarray:
        return self.delivery - self.generation

    @property
    def interarrival(self) -> np.ndarray:
        """Y_j for j >= 1."""
        return np.diff(self.generation)

    @property
    def interdeparture(self) -> np.ndarray:
        """D_j for j >= 1."""
        return np.diff(self.delivery)

    @property
    def peak(self) -> np.ndarray:
        """AoI just before each delivery j >= 1."""
        return self.delivery[1:] - self.generation[:-1]

    def renewal_reward_aoi(self) -> float:
        """Time-average AoI from (E[Y T] + E[Y^2]/2) / E[Y]."""
        y = self.interarrival
        t = self.service_time[1:]
        return (np.mean(y * t) + np.mean(y * y) / 2) / np.mean(y)

    def sawtooth_aoi(self) -> float:
        """Time-average AoI by integrating the sawtooth between the first
        and last delivery."""
        d = self.interdeparture
        prev = self.service_time[:-1]
        return float(np.sum(d * prev + d * d / 2) / np.sum(d))
