"""Closed-form average AoI, average peak AoI and energy cost for one device.

All AoI expressions depend on the rest of the population only through the
effective waiting rate ``k = w * (1 - busy)``.
"""
from __future__ import annotations

from dataclasses import dataclass

from .model import DomainError, Scheme, check_rate, is_infinite, INFINITY


@dataclass(frozen=True)
class AoiPair:
    avg_aoi: float
    avg_peak_aoi: float


def effective_rate(w: float, gamma: float, x_service: float) -> float:
    """Backoff rate thinned by the probability that the sensed channel is idle."""
    busy = gamma * x_service
    if busy < 0.0:
        raise DomainError("gamma * x_service must be >= 0")
    if busy > 1.0:
        raise DomainError("gamma * x_service exceeds 1")
    if is_infinite(w):
        if busy < 1.0:
            return INFINITY
        raise DomainError("effective rate undefined for infinite w with all channels busy")
    return w * (1.0 - busy)


def _check(lam: float, mu: float, k: float) -> tuple[float, float, float]:
    return (check_rate("lambda", lam, allow_infinite=False),
            check_rate("mu", mu, allow_infinite=False),
            check_rate("k", k))


def aoi(scheme: Scheme, lam: float, mu: float, k: float) -> AoiPair:
    """Average AoI and average peak AoI under the stationary regime."""
    lam, mu, k = _check(lam, mu, k)
    scheme = Scheme.parse(scheme)
    if is_infinite(k):
        if scheme is Scheme.WITHOUT_PREEMPTION:
            return AoiPair(1 / lam + 2 / mu - 1 / (lam + mu), 1 / lam + 2 / mu)
        return AoiPair(1 / lam + 1 / mu, 1 / lam + 1 / mu + 1 / (lam + mu))
    overlap = (lam + k + mu) / (lam * k + k * mu + lam * mu)
    if scheme is Scheme.WITHOUT_PREEMPTION:
        avg = 1 / lam + 1 / k + 2 / mu + 1 / (lam + k) - overlap
        peak = 1 / lam + 1 / k + 2 / mu + 1 / (lam + k)
    else:
        avg = 1 / lam + 1 / k + 1 / mu + 1 / (lam + mu) * (1 + mu / (lam + k)) - overlap
        peak = 1 / lam + 1 / k + 1 / mu + 1 / (lam + mu) * (1 + mu / (lam + k))
    return AoiPair(avg, peak)


def mean_interdeparture(lam: float, mu: float, k: float) -> float:
    lam, mu, k = _check(lam, mu, k)
    return 1 / lam + 1 / k + 1 / mu


def second_moment_interdeparture(lam: float, mu: float, k: float) -> float:
    lam, mu, k = _check(lam, mu, k)
    return (2 / lam**2 + 2 / k**2 + 2 / mu**2
            + 2 / (lam * mu) + 2 / (lam * k) + 2 / (k * mu))


def mean_service_time(scheme: Scheme, lam: float, mu: float, k: float) -> float:
    """Expected system time of a delivered update (generation to delivery)."""
    lam, mu, k = _check(lam, mu, k)
    if Scheme.parse(scheme) is Scheme.WITHOUT_PREEMPTION:
        return 1 / (k + lam) + 1 / mu
    return 1 / (lam + mu) * (1 + mu / (lam + k))


def energy_cost(lam: float, mu: float, k: float, c_sense: float, c_transmit: float) -> float:
    """Average energy per unit time with sensing billed per unit of waiting
    time: (E[W] c_sense + E[S] c_transmit) / E[D]."""
    lam, mu, k = _check(lam, mu, k)
    c_sense = check_rate("c_sense", c_sense, allow_infinite=False)
    c_transmit = check_rate("c_transmit", c_transmit, allow_infinite=False)
    if is_infinite(k):
        return (c_transmit / mu) / (1 / lam + 1 / mu)
    return (c_sense / k + c_transmit / mu) / (1 / lam + 1 / k + 1 / mu)


def attempt_energy_cost(lam: float, mu: float, k: float, busy: float,
                        c_sense: float, c_transmit: float) -> float:
    """Average energy per unit time with sensing billed per sensing attempt.

    A waiting device senses at every backoff expiry and needs on average
    ``1 / (1 - busy)`` attempts per update cycle. This is the cost model for
    which the constrained best response is budget-tight.
    """
    lam, mu, k = _check(lam, mu, k)
    c_sense = check_rate("c_sense", c_sense, allow_infinite=False)
    c_transmit = check_rate("c_transmit", c_transmit, allow_infinite=False)
    if not 0.0 <= busy < 1.0:
        raise DomainError("busy fraction must lie in [0, 1)")
    per_cycle = c_sense / (1 - busy) + c_transmit / mu
    if is_infinite(k):
        return per_cycle / (1 / lam + 1 / mu)
    return per_cycle / (1 / lam + 1 / k + 1 / mu)
