"""Shared domain types: system parameters, packet-management schemes, and
mean-field occupancy states.

Rates are plain floats. An infinite waiting rate is ``math.inf`` (exported as
``INFINITY``), so ``a / INFINITY == 0.0`` holds exactly; every formula that
has a different structural limit at infinity branches on ``is_infinite``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

INFINITY = math.inf

# Default energy costs for the game experiments.
DEFAULT_C_SENSE = 0.1
DEFAULT_C_TRANSMIT = 0.2
DEFAULT_C_BUDGET = 0.4

SIMPLEX_TOL = 1e-12


class DomainError(ValueError):
    """Raised when an input lies outside the model's domain."""


def is_infinite(rate: float) -> bool:
    return rate == INFINITY


def check_rate(name: str, value: float, allow_infinite: bool = True) -> float:
    """Validate a strictly positive rate, optionally allowing INFINITY."""
    if value is None or isinstance(value, bool):
        raise DomainError(f"{name} must be a number")
    value = float(value)
    if math.isnan(value):
        raise DomainError(f"{name} must not be NaN")
    if is_infinite(value) and not allow_infinite:
        raise DomainError(f"{name} must be finite")
    if not value > 0:
        raise DomainError(f"{name} must be > 0")
    return value


class Scheme(enum.Enum):
    """Packet management in service: a fresh update either preempts the one
    being transmitted or is dropped."""

    WITHOUT_PREEMPTION = "wop"
    WITH_PREEMPTION = "wp"

    @classmethod
    def parse(cls, text: str | Scheme) -> Scheme:
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("-", "_")
        aliases = {
            "wop": cls.WITHOUT_PREEMPTION,
            "without_preemption": cls.WITHOUT_PREEMPTION,
            "wp": cls.WITH_PREEMPTION,
            "with_preemption": cls.WITH_PREEMPTION,
        }
        try:
            return aliases[key]
        except KeyError:
            raise DomainError(f"unknown scheme {text!r} (expected 'wp' or 'wop')") from None


@dataclass(frozen=True)
class SystemParams:
    """All model constants plus the waiting-rate control ``w``.

    ``lam`` is the per-device update arrival rate, ``mu`` the transmission
    rate and ``gamma`` the device-to-channel ratio N/M. ``n_devices`` and
    ``m_channels`` are only needed by the finite-population simulators.
    """

    lam: float
    mu: float
    gamma: float
    w: float = 1.0
    n_devices: int | None = None
    m_channels: int | None = None
    c_sense: float = DEFAULT_C_SENSE
    c_transmit: float = DEFAULT_C_TRANSMIT
    c_budget: float = DEFAULT_C_BUDGET

    @classmethod
    def from_population(cls, n_devices: int, m_channels: int, **kwargs) -> SystemParams:
        """Build params with ``gamma`` derived from N/M."""
        if m_channels <= 0:
            raise DomainError("m_channels must be a positive integer")
        return cls(gamma=n_devices / m_channels, n_devices=n_devices, m_channels=m_channels,
                   **kwargs)

    def with_(self, **changes) -> SystemParams:
        return replace(self, **changes)

    @property
    def finite_w(self) -> bool:
        return not is_infinite(self.w)


def validate(params: SystemParams) -> SystemParams:
    """Return ``params`` unchanged, or raise DomainError naming the first
    violated invariant."""
    for name in ("lam", "mu", "gamma"):
        value = getattr(params, name)
        if value is None or not _finite_number(value):
            raise DomainError(f"{_public(name)} must be a finite number")
        if not value > 0:
            raise DomainError(f"{_public(name)} must be > 0")
    for name in ("c_sense", "c_transmit", "c_budget"):
        value = getattr(params, name)
        if value is None or not _finite_number(value):
            raise DomainError(f"{name} must be a finite number")
        if not value > 0:
            raise DomainError(f"{name} must be > 0")
    check_rate("w", params.w)
    for name in ("n_devices", "m_channels"):
        value = getattr(params, name)
        if value is None:
            continue
        if isinstance(value, bool) or int(value) != value or value < 1:
            raise DomainError(f"{name} must be a positive integer")
    if params.n_devices is not None and params.m_channels is not None:
        if params.gamma != params.n_devices / params.m_channels:
            raise DomainError("gamma inconsistent with N/M")
    return params


def _finite_number(value) -> bool:
    try:
        return math.isfinite(float(value))
    except (TypeError, ValueError):
        return False


def _public(name: str) -> str:
    return "lambda" if name == "lam" else name


@dataclass(frozen=True)
class MeanFieldState:
    """Occupancy fractions of the idle, waiting and in-service states."""

    x_idle: float
    x_wait: float
    x_service: float

    def __post_init__(self):
        parts = (self.x_idle, self.x_wait, self.x_service)
        if any(not _finite_number(p) for p in parts):
            raise DomainError("state components must be finite")
        for name, value in zip(("x_idle", "x_wait", "x_service"), parts):
            object.__setattr__(self, name, float(value))
        parts = self.as_tuple()
        if any(p < 0.0 or p > 1.0 for p in parts):
            raise DomainError(f"state components must lie in [0, 1]: {parts}")
        if abs(math.fsum(parts) - 1.0) > SIMPLEX_TOL:
            raise DomainError(f"state components must sum to 1: {parts}")

    @classmethod
    def from_triple(cls, idle: float, wait: float, service: float,
                    gamma: float | None = None) -> MeanFieldState:
        """Normalize a nonnegative triple onto the simplex, or reject it."""
        parts = (float(idle), float(wait), float(service))
        if any(not math.isfinite(p) or p < 0.0 for p in parts):
            raise DomainError(f"state components must be finite and nonnegative: {parts}")
        total = math.fsum(parts)
        if total <= 0.0:
            raise DomainError("state triple must have a positive sum")
        state = cls(*(p / total for p in parts))
        if gamma is not None:
            state.check_feasible(gamma)
        return state

    def check_feasible(self, gamma: float) -> MeanFieldState:
        """Reject states where more than all channels would be busy."""
        if gamma * self.x_service > 1.0:
            raise DomainError("gamma * x_service exceeds 1")
        return self

    def busy_fraction(self, gamma: float) -> float:
        """Fraction of busy channels, i.e. the probability a sensed channel
        is busy."""
        return gamma * self.x_service

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x_idle, self.x_wait, self.x_service)

    def distance(self, other: MeanFieldState) -> float:
        """l1 distance between two states."""
        return sum(abs(a - b) for a, b in zip(self.as_tuple(), other.as_tuple()))
