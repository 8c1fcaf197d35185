"""Mean-field ODE for the idle/waiting/service fractions, its closed-form
equilibrium, fixed-step RK4 integration and a Lyapunov decay diagnostic."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator

import numba
import numpy as np

from .model import DomainError, INFINITY, MeanFieldState, SystemParams, is_infinite, validate

DEFAULT_STEP = 1e-3
DEFAULT_HORIZON = 200.0
STOP_DRIFT = 1e-10
RENORM_TOL = 1e-9
SIMPLEX_SLACK = 1e-6

TRAJECTORY_COLUMNS = ("t", "x_I", "x_W", "x_S", "source")


class IntegrationError(RuntimeError):
    """The integrator left the probability simplex (step too large)."""


@dataclass
class Trajectory:
    """Time-stamped occupancy fractions; ``states`` has one row per sample
    with columns (x_I, x_W, x_S)."""

    times: np.ndarray
    states: np.ndarray
    step: float
    source: str = "ode"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float).reshape(-1, 3)
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("trajectory timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def samples(self) -> Iterator[tuple[float, MeanFieldState]]:
        for t, row in zip(self.times, self.states):
            yield float(t), MeanFieldState.from_triple(*row)

    @property
    def final(self) -> MeanFieldState:
        return MeanFieldState.from_triple(*self.states[-1])

    def interpolate(self, times) -> np.ndarray:
        """Linear interpolation of each component at ``times``; holds the last
        value past the end (the integrator stops early only at rest)."""
        times = np.asarray(times, dtype=float)
        return np.column_stack([np.interp(times, self.times, self.states[:, j]) for j in range(3)])

    def rows(self, **extra) -> Iterator[dict]:
        for t, (xi, xw, xs) in zip(self.times, self.states):
            yield {"t": float(t), "x_I": float(xi), "x_W": float(xw), "x_S": float(xs),
                   "source": self.source, **extra}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=TRAJECTORY_COLUMNS, lineterminator="\n")
            writer.writeheader()
            writer.writerows(self.rows())


def drift(state: MeanFieldState, params: SystemParams) -> tuple[float, float, float]:
    """Right-hand side of the mean-field ODE at ``state``."""
    if is_infinite(params.w):
        raise DomainError("drift is undefined for an infinite waiting rate")
    out = _drift(np.array(state.as_tuple()), params.lam, params.mu, params.gamma, params.w)
    return float(out[0]), float(out[1]), float(out[2])


@numba.njit(cache=True)
def _drift(x, lam, mu, gamma, w):
    to_service = w * (1.0 - gamma * x[2]) * x[1]
    out = np.empty(3)
    out[0] = -lam * x[0] + mu * x[2]
    out[1] = lam * x[0] - to_service
    out[2] = to_service - mu * x[2]
    return out


def _idle_channel_share(lam: float, mu: float, gamma: float, w: float) -> float:
    """1 - gamma x_S* at the rest point, solved directly so it keeps full
    relative precision near saturation. Substituting x = (1 - u)/gamma into
    the rest-point quadratic gives w(l+m)u^2 + (w(l g - l - m) + l m)u - l m = 0,
    whose unique positive root is taken in cancellation-free form."""
    a = w * (lam + mu)
    b = w * (lam * gamma - lam - mu) + lam * mu
    c = lam * mu
    root = math.sqrt(b * b + 4.0 * a * c)
    return 2.0 * c / (b + root) if b >= 0 else (root - b) / (2.0 * a)


def _rest_point(params: SystemParams) -> tuple[float, float, float, float]:
    """(x_I, x_W, x_S, u) for finite w, with u = 1 - gamma x_S."""
    lam, mu, gamma, w = params.lam, params.mu, params.gamma, params.w
    a = w * gamma * (lam + mu)
    b = w * (lam + mu + lam * gamma) + lam * mu
    c = lam * w
    disc = b * b - 4.0 * a * c
    larger = (b + math.sqrt(disc)) / (2.0 * a)
    x_s = (c / a) / larger
    u = _idle_channel_share(lam, mu, gamma, w)
    x_i = mu / lam * x_s
    x_w = mu * x_s / (w * u)
    return x_i, x_w, x_s, u


def equilibrium(params: SystemParams) -> MeanFieldState:
    """Unique feasible rest point of the mean-field ODE.

    For finite ``w`` the service fraction is the smaller root of
    ``w(l+m)g x^2 - (w(l+m+l g) + l m) x + l w = 0``, taken as
    ``product_of_roots / larger_root`` to avoid cancellation. For ``w = inf``
    it is the limit of that root, ``min(l/(l+m), 1/g)``.
    """
    validate(params)
    lam, mu, gamma, w = params.lam, params.mu, params.gamma, params.w
    if is_infinite(w):
        x_s = min(lam / (lam + mu), 1.0 / gamma)
        x_i = mu / lam * x_s
        x_w = max(0.0, 1.0 - x_i - x_s)
        return MeanFieldState.from_triple(x_i, x_w, x_s)
    x_i, x_w, x_s, _ = _rest_point(params)
    return MeanFieldState(x_i, x_w, x_s) if _on_simplex(x_i, x_w, x_s) \
        else MeanFieldState.from_triple(x_i, x_w, x_s)


def _on_simplex(*parts: float) -> bool:
    return abs(math.fsum(parts) - 1.0) <= 1e-12 and all(0.0 <= p <= 1.0 for p in parts)


def equilibrium_effective_rate(params: SystemParams) -> float:
    """Effective waiting rate k at the equilibrium induced by ``params.w``.

    With ``w = inf`` and spare channels this is ``inf``; when ``w = inf``
    saturates all channels, k is the finite flux ratio ``mu x_S / x_W``.
    """
    validate(params)
    if is_infinite(params.w):
        x = equilibrium(params)
        if x.busy_fraction(params.gamma) < 1.0 or x.x_wait == 0.0:
            return INFINITY
        return params.mu * x.x_service / x.x_wait
    return params.w * _rest_point(params)[3]


def busy_at_equilibrium(params: SystemParams) -> float:
    return equilibrium(params).busy_fraction(params.gamma)


def integrate(x0: MeanFieldState, params: SystemParams, step: float = DEFAULT_STEP,
              horizon: float = DEFAULT_HORIZON, record_every: int = 1) -> Trajectory:
    """Classical fixed-step RK4; stops early once the l1 drift is below 1e-10."""
    validate(params)
    if is_infinite(params.w):
        raise DomainError("cannot integrate the ODE with an infinite waiting rate")
    if not step > 0:
        raise DomainError("step must be > 0")
    if not horizon >= step:
        raise DomainError("horizon must be >= step")
    if record_every < 1:
        raise DomainError("record_every must be >= 1")
    n_steps = int(round(horizon / step))
    x = np.array(x0.as_tuple(), dtype=float)
    times, states, status = _rk4(x, params.lam, params.mu, params.gamma, params.w, step,
                                 n_steps, record_every)
    if status >= 0:
        raise IntegrationError(f"state left the simplex at step {status}; reduce the step size")
    return Trajectory(times, states, step, source="ode")


@numba.njit(cache=True)
def _rk4(x0, lam, mu, gamma, w, h, n_steps, record_every):
    cap = n_steps // record_every + 2
    times = np.empty(cap)
    states = np.empty((cap, 3))
    x = x0.copy()
    times[0] = 0.0
    states[0] = x
    n_rec = 1
    status = -1
    for i in range(1, n_steps + 1):
        k1 = _drift(x, lam, mu, gamma, w)
        k2 = _drift(x + 0.5 * h * k1, lam, mu, gamma, w)
        k3 = _drift(x + 0.5 * h * k2, lam, mu, gamma, w)
        k4 = _drift(x + h * k3, lam, mu, gamma, w)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        total = x[0] + x[1] + x[2]
        if x.min() < -SIMPLEX_SLACK or abs(total - 1.0) > SIMPLEX_SLACK:
            status = i
            break
        if x.min() < 0.0 or abs(total - 1.0) < RENORM_TOL:
            for j in range(3):
                if x[j] < 0.0:
                    x[j] = 0.0
            x = x / (x[0] + x[1] + x[2])
        d = _drift(x, lam, mu, gamma, w)
        at_rest = abs(d[0]) + abs(d[1]) + abs(d[2]) < STOP_DRIFT
        if i % record_every == 0 or at_rest or i == n_steps:
            times[n_rec] = i * h
            states[n_rec] = x
            n_rec += 1
        if at_rest:
            break
    return times[:n_rec], states[:n_rec], status


def stability_rate(params: SystemParams) -> float:
    """Lower bound on the l1 decay rate of the linearised dynamics at the
    equilibrium: min(lambda, w(1 - gamma x_S*), w gamma x_W*)."""
    validate(params)
    if is_infinite(params.w):
        raise DomainError("stability rate needs a finite waiting rate")
    _, x_w, _, u = _rest_point(params)
    w, gamma = params.w, params.gamma
    return min(params.lam, w * u, w * gamma * x_w)
