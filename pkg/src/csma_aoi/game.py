"""Mean-field game over the waiting rate.

A device facing a busy-channel fraction ``theta`` picks the largest waiting
rate its energy budget allows (every AoI metric decreases in the rate); the
mean-field equilibrium (MFE) is a rate that is a best response to the
population state it induces.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

from . import analytic
from .model import DomainError, INFINITY, Scheme, SystemParams, is_infinite, validate
from .meanfield import equilibrium, equilibrium_effective_rate

REL_TOL = 1e-9
# Two phases count as a cycle only if they differ by more than this; an
# alternating sequence converging with ratio -r has iterates two apart closer
# than neighbours by the factor r(1 - r), so a small-gap "cycle" is
# usually still converging.
CYCLE_GAP = 1e-6

TRACE_COLUMNS = ("iter", "w", "theta", "avg_aoi_wp", "avg_aoi_wop",
                 "peak_aoi_wp", "peak_aoi_wop", "energy")


class MfeCase(enum.Enum):
    CASE1 = "CASE1"  # w* = inf is the unique MFE
    CASE2 = "CASE2"  # unique finite MFE
    CASE3 = "CASE3"  # no MFE; best responses alternate


class Terminal(enum.Enum):
    CONVERGED = "CONVERGED"
    OSCILLATING = "OSCILLATING"
    MAX_ITERS = "MAX_ITERS"


@dataclass(frozen=True)
class MfeOutcome:
    case_tag: MfeCase
    w_star: float | None = None
    theta_star: float | None = None
    oscillation_pair: tuple[float, float] | None = None

    def __post_init__(self):
        tag = self.case_tag
        if tag is MfeCase.CASE1:
            ok = (self.w_star == INFINITY and self.theta_star is None
                  and self.oscillation_pair is None)
        elif tag is MfeCase.CASE2:
            ok = (self.theta_star is not None and 0.0 < self.theta_star < 1.0
                  and self.w_star is not None and 0.0 < self.w_star < INFINITY
                  and self.oscillation_pair is None)
        else:
            ok = (self.oscillation_pair is not None and self.w_star is None
                  and self.theta_star is None)
        if not ok:
            raise ValueError(f"fields inconsistent with {tag.value}: {self}")


@dataclass(frozen=True)
class IterationStep:
    index: int
    w: float
    theta: float
    wp: analytic.AoiPair
    wop: analytic.AoiPair
    energy: float


@dataclass
class IterationTrace:
    steps: list[IterationStep] = field(default_factory=list)
    terminal: Terminal = Terminal.MAX_ITERS

    @property
    def final_w(self) -> float:
        return self.steps[-1].w

    def rows(self):
        for s in self.steps:
            yield {
                "iter": s.index, "w": s.w, "theta": s.theta,
                "avg_aoi_wp": s.wp.avg_aoi, "avg_aoi_wop": s.wop.avg_aoi,
                "peak_aoi_wp": s.wp.avg_peak_aoi, "peak_aoi_wop": s.wop.avg_peak_aoi,
                "energy": s.energy,
            }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS, lineterminator="\n")
            writer.writeheader()
            writer.writerows(self.rows())


def _budget_slack(params: SystemParams) -> float:
    """c_transmit/mu - (1/lambda + 1/mu) * budget; negative when the budget
    covers a transmission plus its share of idle time."""
    return params.c_transmit / params.mu - (1 / params.lam + 1 / params.mu) * params.c_budget


def best_response(theta: float, params: SystemParams) -> float:
    """Largest waiting rate whose energy cost stays within budget at busy
    fraction ``theta``; INFINITY when the budget never binds."""
    if not 0.0 <= theta < 1.0:
        raise DomainError("theta must lie in [0, 1)")
    c_s, c_t, c_hat = params.c_sense, params.c_transmit, params.c_budget
    lam, mu = params.lam, params.mu
    lhs = c_s / (1 - theta) + c_t / mu
    rhs = (1 / lam + 1 / mu) * c_hat
    if lhs > rhs:
        return (c_hat / (1 - theta)) / (c_s / (1 - theta) + c_t / mu - (1 / lam + 1 / mu) * c_hat)
    return INFINITY


def _response(theta: float, params: SystemParams) -> float:
    # At theta = 1 (every channel busy) the response is the theta -> 1 limit.
    if theta >= 1.0:
        return params.c_budget / params.c_sense
    return best_response(theta, params)


def theta_star(params: SystemParams) -> float:
    """Busy fraction at a finite MFE; independent of the arrival rate."""
    validate(params)
    gamma, mu = params.gamma, params.mu
    c_s, c_t, c_hat = params.c_sense, params.c_transmit, params.c_budget
    b = gamma * c_hat + mu * c_s + c_t
    disc = b * b - 4 * gamma * c_t * c_hat
    assert disc > 0, "discriminant must be positive"
    # smaller root of c_t th^2 - b th + gamma c_hat = 0, cancellation-free
    return 2 * gamma * c_hat / (b + math.sqrt(disc))


def _idle_share_at_infinite_rate(params: SystemParams) -> float:
    return max(0.0, 1 - params.gamma * params.lam / (params.lam + params.mu))


def classify_mfe(params: SystemParams) -> MfeOutcome:
    """Existence/uniqueness classification of the MFE."""
    validate(params)
    c_s, c_t, c_hat = params.c_sense, params.c_transmit, params.c_budget
    lam, mu = params.lam, params.mu
    rhs = (1 / lam + 1 / mu) * c_hat
    spare = _idle_share_at_infinite_rate(params)
    sense_term = c_s / spare if spare > 0 else INFINITY
    if sense_term + c_t / mu <= rhs:
        return MfeOutcome(MfeCase.CASE1, w_star=INFINITY)
    th = theta_star(params)
    if c_s / (1 - th) + c_t / mu > rhs:
        return MfeOutcome(MfeCase.CASE2, w_star=best_response(th, params), theta_star=th)
    # Unreachable for valid parameters (the case-2 test failing implies the
    # case-1 test held); kept so all three outcome tags have a branch.
    if spare > 0:
        finite = (c_hat / spare) / (c_s / spare + c_t / mu - rhs)
    else:
        finite = c_hat / c_s
    return MfeOutcome(MfeCase.CASE3, oscillation_pair=(INFINITY, finite))


def convergence_condition(params: SystemParams) -> tuple[bool, float, float]:
    """Sufficient condition for best-response iteration to contract.

    Returns ``(satisfied, value, B)`` where the condition is ``value < 1``.
    """
    validate(params)
    slack = _budget_slack(params)
    b = min(params.c_sense, params.c_sense + slack)
    if b == 0.0:
        # slack = -c_sense != 0 here, so the bound is unbounded
        return False, INFINITY, b
    value = params.gamma * params.c_budget / (params.mu * b**2) * abs(slack)
    return value < 1, value, b


def _close(a: float, b: float, tol: float = REL_TOL) -> bool:
    if is_infinite(a) or is_infinite(b):
        return a == b
    return abs(a - b) <= tol * max(abs(a), abs(b))


def _terminal(ws: list[float]) -> Terminal | None:
    if len(ws) >= 2 and _close(ws[-1], ws[-2]):
        return Terminal.CONVERGED
    if (len(ws) >= 4 and _close(ws[-1], ws[-3]) and _close(ws[-2], ws[-4])
            and not _close(ws[-1], ws[-2], CYCLE_GAP)):
        return Terminal.OSCILLATING
    return None


def _step(index: int, w: float, params: SystemParams) -> IterationStep:
    p = params.with_(w=w)
    x = equilibrium(p)
    theta = x.busy_fraction(params.gamma)
    k = equilibrium_effective_rate(p)
    wp = analytic.aoi(Scheme.WITH_PREEMPTION, params.lam, params.mu, k)
    wop = analytic.aoi(Scheme.WITHOUT_PREEMPTION, params.lam, params.mu, k)
    if theta < 1.0:
        energy = analytic.attempt_energy_cost(params.lam, params.mu, k, theta,
                                              params.c_sense, params.c_transmit)
    else:
        # every channel busy: infinitely many sensing attempts per delivery
        energy = INFINITY
    return IterationStep(index, w, theta, wp, wop, energy)


def fixed_point_iterate(params: SystemParams, w0: float, max_iters: int = 200) -> IterationTrace:
    """Synchronous best-response dynamics w <- T_w(T_MF(w)) from ``w0``."""
    validate(params)
    if not w0 > 0:
        raise DomainError("w0 must be > 0")
    trace = IterationTrace()
    ws: list[float] = []
    w = float(w0)
    for index in range(max_iters + 1):
        step = _step(index, w, params)
        trace.steps.append(step)
        ws.append(w)
        verdict = _terminal(ws)
        if verdict is not None:
            trace.terminal = verdict
            return trace
        w = _response(step.theta, params)
    trace.terminal = Terminal.MAX_ITERS
    return trace


def busy_fraction_of_rate(w: float, params: SystemParams) -> float:
    return equilibrium(params.with_(w=w)).busy_fraction(params.gamma)


def sensitivity(w: float, params: SystemParams) -> tuple[float, float, float]:
    """Derivatives of the two maps composing the best-response iteration at
    ``w``: d theta / d w of the mean-field map, d w / d theta of the finite
    best response, and the absolute product (local contraction factor)."""
    validate(params)
    if is_infinite(w) or not w > 0:
        raise DomainError("sensitivity needs a finite w > 0")
    lam, mu, gamma = params.lam, params.mu, params.gamma
    theta = busy_fraction_of_rate(w, params)
    denom = ((lam + mu) * w * (1 - theta) + lam * mu) ** 2 + gamma * lam**2 * mu * w
    dtheta_dw = gamma * lam**2 * mu * (1 - theta) / denom
    slack = _budget_slack(params)
    dw_dtheta = params.c_budget * slack / (params.c_sense + slack * (1 - theta)) ** 2
    return dtheta_dw, dw_dtheta, abs(dtheta_dw * dw_dtheta)
