"""A single device in isolation with a given effective waiting rate."""
from __future__ import annotations

import numpy as np

from ..model import DEFAULT_C_SENSE, DEFAULT_C_TRANSMIT, DomainError, Scheme, check_rate
from . import kernels
from .records import AoiStats, DeliveryLog
from .streams import stream

# substream tags, one per clock family (common random numbers across schemes)
_ARRIVALS, _BACKOFF, _SERVICE = 0, 1, 2


def device_logs(lam: float, mu: float, k: float, n_arrivals: int, seed: int,
                replication: int = 0) -> dict[Scheme, DeliveryLog]:
    """Delivery logs of both schemes on one common sample path."""
    lam = check_rate("lambda", lam, allow_infinite=False)
    mu = check_rate("mu", mu, allow_infinite=False)
    k = check_rate("k", k, allow_infinite=False)
    if n_arrivals < 2:
        raise DomainError("n_arrivals must be >= 2")
    gaps = stream(seed, replication, _ARRIVALS).standard_exponential(n_arrivals)
    arrivals = np.cumsum(gaps) / lam
    backoffs = stream(seed, replication, _BACKOFF).standard_exponential(n_arrivals) / k
    services = stream(seed, replication, _SERVICE).standard_exponential(n_arrivals) / mu
    start, end, done, g_wop, g_wp = kernels.device_cycles(arrivals, backoffs, services)
    return {
        Scheme.WITHOUT_PREEMPTION: DeliveryLog(g_wop, done, start, end),
        Scheme.WITH_PREEMPTION: DeliveryLog(g_wp, done, start, end),
    }


def stats_from_log(log: DeliveryLog, c_sense: float = DEFAULT_C_SENSE,
                   c_transmit: float = DEFAULT_C_TRANSMIT) -> AoiStats:
    if len(log) < 2:
        raise DomainError("need at least two deliveries for statistics")
    d = log.interdeparture
    span = float(log.delivery[-1] - log.delivery[0])
    waiting = np.sum(log.wait_end[1:] - log.wait_start[1:])
    serving = np.sum(log.delivery[1:] - log.wait_end[1:])
    return AoiStats(
        time_avg_aoi=log.sawtooth_aoi(),
        mean_peak_aoi=float(np.mean(log.peak)),
        delivered_count=len(log),
        mean_service_time=float(np.mean(log.service_time)),
        mean_interdeparture=float(np.mean(d)),
        second_moment_interdeparture=float(np.mean(d * d)),
        energy_rate=float((waiting * c_sense + serving * c_transmit) / span),
        observation_span=span,
    )


def simulate_device(scheme: Scheme, lam: float, mu: float, k: float, n_arrivals: int,
                    seed: int, replication: int = 0, c_sense: float = DEFAULT_C_SENSE,
                    c_transmit: float = DEFAULT_C_TRANSMIT) -> AoiStats:
    """Simulate one device fed by ``n_arrivals`` Poisson(lam) updates.

    The waiting period ends after Exp(k); service lasts Exp(mu). Only the
    stored generation time changes on replacement or preemption, never the
    running clocks. Statistics span the first to the last delivery.
    """
    if k == np.inf:
        raise DomainError("k must be finite for simulation; use the analytic limits")
    logs = device_logs(lam, mu, k, n_arrivals, seed, replication)
    return stats_from_log(logs[Scheme.parse(scheme)], c_sense, c_transmit)
