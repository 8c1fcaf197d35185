"""Exact simulation of the (idle, waiting, service) population-count chain."""
from __future__ import annotations

from functools import partial

import numpy as np

from ..meanfield import Trajectory
from ..model import DomainError, MeanFieldState, SystemParams, is_infinite, validate
from ..parallel import ordered_map
from . import kernels
from .streams import stream

# stream tag separating density runs from population runs under one seed
_DENSITY = 7


def _initial_counts(params: SystemParams, x0: MeanFieldState | None) -> np.ndarray:
    validate(params)
    if is_infinite(params.w):
        raise DomainError("density simulation needs a finite waiting rate")
    if params.n_devices is None or params.m_channels is None:
        raise DomainError("density simulation needs n_devices and m_channels")
    n = int(params.n_devices)
    if x0 is None:
        return np.array([n, 0, 0], np.int64)
    counts = np.floor(np.asarray(x0.as_tuple()) * n + 0.5).astype(np.int64)
    counts[0] += n - counts.sum()
    if counts.min() < 0 or counts[2] > params.m_channels:
        raise DomainError("initial state cannot be represented with N devices and M channels")
    return counts


def _run(params: SystemParams, horizon: float, seed: int, replication: int,
         sample_dt: float, counts0: np.ndarray, warmup: float = 0.0):
    if horizon <= 0 or sample_dt <= 0:
        raise DomainError("horizon and sample_dt must be > 0")
    return kernels.density(stream(seed, replication, _DENSITY), counts0, int(params.m_channels),
                           params.lam, params.mu, params.w, float(horizon), float(warmup),
                           float(sample_dt))


def simulate_density(params: SystemParams, horizon: float = 10.0, seed: int = 0,
                     replication: int = 0, sample_dt: float = 0.1,
                     x0: MeanFieldState | None = None) -> Trajectory:
    """One sample path of the count chain as fractions on a fixed grid.

    Starts all idle unless ``x0`` is given (rounded to counts)."""
    counts0 = _initial_counts(params, x0)
    times, counts, _ = _run(params, horizon, seed, replication, sample_dt, counts0)
    n = int(params.n_devices)
    return Trajectory(times, counts / n, step=sample_dt, source="sim_single",
                      meta={"n_devices": n, "replication": replication})


def _path(replication, params, horizon, seed, sample_dt, counts0):
    return _run(params, horizon, seed, replication, sample_dt, counts0)[1]


def density_mean_trajectory(params: SystemParams, replications: int, horizon: float = 10.0,
                            seed: int = 0, sample_dt: float = 0.1,
                            x0: MeanFieldState | None = None,
                            jobs: int | None = 1) -> Trajectory:
    """Pointwise mean over replications 0..R-1, summed in replication order."""
    if replications < 1:
        raise DomainError("replications must be >= 1")
    counts0 = _initial_counts(params, x0)
    work = partial(_path, params=params, horizon=horizon, seed=seed, sample_dt=sample_dt,
                   counts0=counts0)
    total = None
    for counts in ordered_map(work, range(replications), jobs):
        total = counts.astype(float) if total is None else total + counts
    n = int(params.n_devices)
    times = np.arange(total.shape[0]) * sample_dt
    return Trajectory(times, total / (replications * n), step=sample_dt, source="sim_mean",
                      meta={"n_devices": n, "replications": replications})


def stationary_density(params: SystemParams, horizon: float, warmup: float, seed: int = 0,
                       replication: int = 0) -> np.ndarray:
    """Time-averaged fractions over [warmup, horizon] on one path started
    at the rounded mean-field equilibrium."""
    from ..meanfield import equilibrium

    counts0 = _initial_counts(params, equilibrium(params))
    _, _, occ = _run(params, horizon, seed, replication, horizon, counts0, warmup)
    return occ / (int(params.n_devices) * (horizon - warmup))
