"""Event-driven simulation of N devices contending for M channels."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from ..meanfield import Trajectory
from ..model import DomainError, MeanFieldState, Scheme, SystemParams, is_infinite, validate
from ..parallel import ordered_map
from . import kernels
from .records import AoiStats
from .streams import stream

STATS_COLUMNS = ("scheme", "lambda", "mu", "gamma", "w", "n_devices", "m_channels",
                 "k_measured", "avg_aoi", "peak_aoi", "energy", "attempt_energy",
                 "replications", "avg_aoi_stderr", "peak_aoi_stderr", "energy_stderr")

_SCHEME_INDEX = {Scheme.WITHOUT_PREEMPTION: 0, Scheme.WITH_PREEMPTION: 1}


class CapacityError(AssertionError):
    """More devices in service than channels; impossible under sensing."""


@dataclass
class PopulationRun:
    scheme: Scheme
    paired: dict[Scheme, AoiStats]
    trajectory: Trajectory | None
    stationary: MeanFieldState
    k_measured: float

    @property
    def stats(self) -> AoiStats:
        return self.paired[self.scheme]


def _check_population(params: SystemParams) -> tuple[int, int]:
    validate(params)
    if is_infinite(params.w):
        raise DomainError("population simulation needs a finite waiting rate")
    if params.n_devices is None or params.m_channels is None:
        raise DomainError("population simulation needs n_devices and m_channels")
    return int(params.n_devices), int(params.m_channels)


def simulate_population(scheme: Scheme, params: SystemParams, horizon: float = 1000.0,
                        warmup: float | None = None, seed: int = 0, replication: int = 0,
                        sample_dt: float = 0.1) -> PopulationRun:
    """One replication of the N-device system; both schemes are tracked on
    the same sample path and ``paired`` holds each. Statistics use
    [warmup, horizon] (warmup defaults to horizon / 2). ``sample_dt = 0``
    skips the fraction trajectory."""
    n_dev, m_ch = _check_population(params)
    warmup = horizon / 2 if warmup is None else float(warmup)
    if not 0 <= warmup < horizon:
        raise DomainError("warmup must satisfy 0 <= warmup < horizon")
    rng = stream(seed, replication)
    try:
        scalars, occ, times, counts = kernels.population(
            rng, n_dev, m_ch, params.lam, params.mu, params.w, float(horizon), warmup,
            float(sample_dt))
    except RuntimeError as exc:  # pragma: no cover - guarded by construction
        raise CapacityError(str(exc)) from exc
    if counts.size and counts[:, 2].max() > m_ch:
        raise CapacityError("sampled service count exceeds channel count")

    span = horizon - warmup
    device_time = n_dev * span
    deliveries = int(scalars[6])
    inter_n = scalars[9]
    attempts, to_service = scalars[10], scalars[11]
    energy = (occ[1] * params.c_sense + occ[2] * params.c_transmit) / device_time
    attempt_energy = (attempts * params.c_sense + occ[2] * params.c_transmit) / device_time
    paired = {}
    for scheme_key, i in _SCHEME_INDEX.items():
        paired[scheme_key] = AoiStats(
            time_avg_aoi=scalars[0 + i] / device_time,
            mean_peak_aoi=scalars[2 + i] / deliveries if deliveries else math.nan,
            delivered_count=deliveries,
            mean_service_time=scalars[4 + i] / deliveries if deliveries else math.nan,
            mean_interdeparture=scalars[7] / inter_n if inter_n else math.nan,
            second_moment_interdeparture=scalars[8] / inter_n if inter_n else math.nan,
            energy_rate=energy,
            observation_span=span,
            attempt_energy_rate=attempt_energy,
        )
    trajectory = None
    if counts.size:
        trajectory = Trajectory(times, counts / n_dev, step=sample_dt, source="sim_single",
                                meta={"n_devices": n_dev})
    stationary = MeanFieldState.from_triple(*(occ / device_time))
    k_measured = to_service / occ[1] if occ[1] > 0 else math.inf
    return PopulationRun(Scheme.parse(scheme), paired, trajectory, stationary, k_measured)


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float

    @classmethod
    def of(cls, values) -> Estimate:
        values = np.asarray(values, dtype=float)
        if len(values) < 2:
            return cls(float(values.mean()), math.nan)
        return cls(float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values))))


@dataclass
class PopulationSummary:
    """Replication means and standard errors for both schemes."""

    params: SystemParams
    replications: int
    horizon: float
    warmup: float
    avg_aoi: dict[Scheme, Estimate]
    peak_aoi: dict[Scheme, Estimate]
    energy: Estimate
    attempt_energy: Estimate
    k_measured: Estimate
    stationary: tuple[Estimate, Estimate, Estimate]
    paired_gap: Estimate = field(default=None)  # WOP minus WP avg AoI, per replication

    def rows(self):
        p = self.params
        for scheme in (Scheme.WITH_PREEMPTION, Scheme.WITHOUT_PREEMPTION):
            yield {
                "scheme": scheme.value, "lambda": p.lam, "mu": p.mu, "gamma": p.gamma,
                "w": p.w, "n_devices": p.n_devices, "m_channels": p.m_channels,
                "k_measured": self.k_measured.mean,
                "avg_aoi": self.avg_aoi[scheme].mean, "peak_aoi": self.peak_aoi[scheme].mean,
                "energy": self.energy.mean, "attempt_energy": self.attempt_energy.mean,
                "replications": self.replications,
                "avg_aoi_stderr": self.avg_aoi[scheme].stderr,
                "peak_aoi_stderr": self.peak_aoi[scheme].stderr,
                "energy_stderr": self.energy.stderr,
            }


def _one_replication(replication: int, params: SystemParams, horizon: float, warmup: float,
                     seed: int) -> tuple:
    run = simulate_population(Scheme.WITH_PREEMPTION, params, horizon, warmup, seed,
                              replication, sample_dt=0.0)
    wp, wop = run.paired[Scheme.WITH_PREEMPTION], run.paired[Scheme.WITHOUT_PREEMPTION]
    return (wp.time_avg_aoi, wop.time_avg_aoi, wp.mean_peak_aoi, wop.mean_peak_aoi,
            wp.energy_rate, wp.attempt_energy_rate, run.k_measured,
            *run.stationary.as_tuple())


def replicate_population(params: SystemParams, replications: int, horizon: float = 1000.0,
                         warmup: float | None = None, seed: int = 0,
                         jobs: int | None = 1) -> PopulationSummary:
    """Run replications 0..R-1 (stream (seed, r) each) and pool them in
    replication order."""
    _check_population(params)
    if replications < 1:
        raise DomainError("replications must be >= 1")
    warmup = horizon / 2 if warmup is None else float(warmup)
    work = partial(_one_replication, params=params, horizon=horizon, warmup=warmup, seed=seed)
    table = np.array(ordered_map(work, range(replications), jobs))
    wp, wop = Scheme.WITH_PREEMPTION, Scheme.WITHOUT_PREEMPTION
    return PopulationSummary(
        params=params, replications=replications, horizon=horizon, warmup=warmup,
        avg_aoi={wp: Estimate.of(table[:, 0]), wop: Estimate.of(table[:, 1])},
        peak_aoi={wp: Estimate.of(table[:, 2]), wop: Estimate.of(table[:, 3])},
        energy=Estimate.of(table[:, 4]),
        attempt_energy=Estimate.of(table[:, 5]),
        k_measured=Estimate.of(table[:, 6]),
        stationary=tuple(Estimate.of(table[:, 7 + j]) for j in range(3)),
        paired_gap=Estimate.of(table[:, 1] - table[:, 0]),
    )


@dataclass(frozen=True)
class ConvergenceRow:
    n_devices: int
    m_channels: int
    deviation: tuple[float, float, float]   # |mean stationary fraction - x*| per component
    stderr: tuple[float, float, float]
    replications: int
    horizon: float
    warmup: float


def estimate_rate_of_convergence(params: SystemParams, sizes, replications: int, seed: int = 0,
                                 horizon: float | dict = 1000.0, warmup: float | dict = 100.0,
                                 jobs: int | None = 1) -> list[ConvergenceRow]:
    """Distance of the simulated stationary fractions from the mean-field
    equilibrium for each population size. ``horizon`` and ``warmup`` may be
    per-size dicts so that small systems can run longer."""
    from ..meanfield import equilibrium

    target = np.array(equilibrium(params).as_tuple())
    rows = []
    for n in sizes:
        m = n / params.gamma
        if abs(m - round(m)) > 1e-9 or round(m) < 1:
            raise DomainError(f"N={n} is not compatible with gamma={params.gamma!r}")
        sized = params.with_(n_devices=int(n), m_channels=int(round(m)))
        h = horizon[n] if isinstance(horizon, dict) else horizon
        wu = warmup[n] if isinstance(warmup, dict) else warmup
        summary = replicate_population(sized, replications, h, wu, seed, jobs)
        means = np.array([e.mean for e in summary.stationary])
        rows.append(ConvergenceRow(
            n_devices=int(n), m_channels=int(round(m)),
            deviation=tuple(float(v) for v in np.abs(means - target)),
            stderr=tuple(e.stderr for e in summary.stationary),
            replications=replications, horizon=float(h), warmup=float(wu)))
    return rows
