"""Named, reproducible experiment recipes writing CSV artifacts.

Every recipe is a pure function of its ``ExperimentSpec``: rerunning with
the same name, seed and overrides writes byte-identical files regardless of
the worker count. Each row carries the full parameter tuple.
"""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable

import numpy as np

from . import analytic
from .game import (MfeCase, classify_mfe, convergence_condition, fixed_point_iterate,
                   sensitivity)
from .meanfield import busy_at_equilibrium, equilibrium_effective_rate, integrate
from .model import (DEFAULT_C_BUDGET, DEFAULT_C_SENSE, DEFAULT_C_TRANSMIT, DomainError,
                    MeanFieldState, Scheme, SystemParams, is_infinite)
from .parallel import ordered_map
from .sim import (density_mean_trajectory, device_logs, estimate_rate_of_convergence,
                  replicate_population, simulate_density, stats_from_log)

WP, WOP = Scheme.WITH_PREEMPTION, Scheme.WITHOUT_PREEMPTION


def sweep_grid(lo: float = 0.3, hi: float = 1.9, step: float = 0.2) -> tuple[float, ...]:
    n = int(round((hi - lo) / step)) + 1
    return tuple(round(lo + i * step, 10) for i in range(n))


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment invocation. ``grid`` overrides recipe defaults by key
    (e.g. ``{"lambda": (0.1, 0.2)}``); ``replications`` overrides the main
    replication count of the recipe."""

    name: str
    seed: int = 0
    out_dir: Path = Path(".")
    replications: int | None = None
    grid: dict = field(default_factory=dict)
    dat: bool = False

    def __post_init__(self):
        if self.name not in REGISTRY:
            raise DomainError(f"unknown experiment {self.name!r}; known: {', '.join(REGISTRY)}")
        for key, values in self.grid.items():
            if key not in REGISTRY[self.name].grid_keys:
                raise DomainError(f"experiment {self.name} has no grid key {key!r}")
            if isinstance(values, (tuple, list)) and len(values) == 0:
                raise DomainError(f"grid {key!r} must be non-empty")
        if self.replications is not None and self.replications < 1:
            raise DomainError("replications must be >= 1")

    def get(self, key: str):
        return self.grid.get(key, REGISTRY[self.name].defaults[key])

    def reps(self, default: int) -> int:
        return default if self.replications is None else self.replications

    def costs(self) -> dict:
        return {"c_sense": self.get("c_sense"), "c_transmit": self.get("c_transmit"),
                "c_budget": self.get("c_budget")}


def _cost_columns(p: SystemParams) -> dict:
    return {"c_sense": p.c_sense, "c_transmit": p.c_transmit, "c_budget": p.c_budget}


# ---------------------------------------------------------------- fig3

def _fig3_point(lam: float, mu: float, k: float, n_arrivals: int, seed: int,
                replications: int) -> list[dict]:
    sims = {WP: [], WOP: []}
    for r in range(replications):
        logs = device_logs(lam, mu, k, n_arrivals, seed, r)
        for scheme in (WP, WOP):
            sims[scheme].append(stats_from_log(logs[scheme]))
    exact = {s: analytic.aoi(s, lam, mu, k) for s in (WP, WOP)}
    gain_avg = 1 - exact[WP].avg_aoi / exact[WOP].avg_aoi
    gain_peak = 1 - exact[WP].avg_peak_aoi / exact[WOP].avg_peak_aoi
    rows = []
    for scheme in (WP, WOP):
        sim_avg = math.fsum(s.time_avg_aoi for s in sims[scheme]) / replications
        sim_peak = math.fsum(s.mean_peak_aoi for s in sims[scheme]) / replications
        rows.append({
            "scheme": scheme.value, "lambda": lam, "mu": mu, "k": k,
            "n_arrivals": n_arrivals, "replications": replications, "seed": seed,
            "analytic_avg_aoi": exact[scheme].avg_aoi, "sim_avg_aoi": sim_avg,
            "rel_err_avg": sim_avg / exact[scheme].avg_aoi - 1,
            "analytic_peak_aoi": exact[scheme].avg_peak_aoi, "sim_peak_aoi": sim_peak,
            "rel_err_peak": sim_peak / exact[scheme].avg_peak_aoi - 1,
            "wp_gain_avg": gain_avg, "wp_gain_peak": gain_peak,
        })
    return rows


def run_fig3(spec: ExperimentSpec, jobs: int | None = 1) -> dict[str, list[dict]]:
    """Single-device AoI, simulated against the closed forms, over lambda.

    ``wp_gain_*`` is the relative reduction 1 - WP/WOP of the closed forms.
    """
    work = partial(_fig3_point, mu=spec.get("mu"), k=spec.get("k"),
                   n_arrivals=spec.get("n_arrivals"), seed=spec.seed,
                   replications=spec.reps(1))
    rows = [r for point in ordered_map(work, spec.get("lambda"), jobs) for r in point]
    return {"": rows}


# ---------------------------------------------------------------- fig4 / table 1

def _fig4_rows(spec: ExperimentSpec, jobs) -> list[dict]:
    lam, mu, gamma, w = spec.get("lambda"), spec.get("mu"), spec.get("gamma"), spec.get("w")
    horizon, dt = spec.get("horizon"), spec.get("sample_dt")
    reps = spec.reps(200)
    rows = []
    for n in spec.get("n_devices"):
        p = SystemParams.from_population(n, int(round(n / gamma)), lam=lam, mu=mu, w=w)
        single = simulate_density(p, horizon, spec.seed, 0, dt)
        mean = density_mean_trajectory(p, reps, horizon, spec.seed, dt, jobs=jobs)
        ode = integrate(MeanFieldState(1.0, 0.0, 0.0), p, 1e-3, horizon)
        ode_on_grid = ode.interpolate(mean.times)
        extra = {"n_devices": n, "lambda": lam, "mu": mu, "gamma": gamma, "w": w,
                 "seed": spec.seed}
        rows += single.rows(**extra, replications=1)
        rows += mean.rows(**extra, replications=reps)
        for t, (xi, xw, xs) in zip(mean.times, ode_on_grid):
            rows.append({"t": float(t), "x_I": float(xi), "x_W": float(xw), "x_S": float(xs),
                         "source": "ode", **extra, "replications": 0})
    return rows


def _table1_rows(spec: ExperimentSpec, jobs) -> list[dict]:
    lam, mu, gamma, w = spec.get("lambda"), spec.get("mu"), spec.get("gamma"), spec.get("table_w")
    base = SystemParams(lam=lam, mu=mu, gamma=gamma, w=w)
    reps = spec.reps(200)
    horizon, warmup = spec.get("table_horizon"), spec.get("table_warmup")
    params = {"lambda": lam, "mu": mu, "gamma": gamma, "w": w, "horizon": horizon,
              "warmup": warmup, "seed": spec.seed}
    rows = []
    for n in spec.get("table_n_devices"):
        p = base.with_(n_devices=n, m_channels=int(round(n / gamma)))
        s = replicate_population(p, reps, horizon, warmup, spec.seed, jobs)
        rows.append({
            "column": f"N={n}", "n_devices": n, **params, "replications": reps,
            "avg_aoi_wp": s.avg_aoi[WP].mean, "peak_aoi_wp": s.peak_aoi[WP].mean,
            "avg_aoi_wop": s.avg_aoi[WOP].mean, "peak_aoi_wop": s.peak_aoi[WOP].mean,
            "avg_aoi_wp_stderr": s.avg_aoi[WP].stderr,
            "peak_aoi_wp_stderr": s.peak_aoi[WP].stderr,
            "avg_aoi_wop_stderr": s.avg_aoi[WOP].stderr,
            "peak_aoi_wop_stderr": s.peak_aoi[WOP].stderr,
            "k_measured": s.k_measured.mean, "x_S": s.stationary[2].mean,
        })
    k = equilibrium_effective_rate(base)
    exact = {sch: analytic.aoi(sch, lam, mu, k) for sch in (WP, WOP)}
    rows.append({
        "column": "mean-field", "n_devices": "", **params, "replications": 0,
        "avg_aoi_wp": exact[WP].avg_aoi, "peak_aoi_wp": exact[WP].avg_peak_aoi,
        "avg_aoi_wop": exact[WOP].avg_aoi, "peak_aoi_wop": exact[WOP].avg_peak_aoi,
        "avg_aoi_wp_stderr": 0.0, "peak_aoi_wp_stderr": 0.0,
        "avg_aoi_wop_stderr": 0.0, "peak_aoi_wop_stderr": 0.0,
        "k_measured": k, "x_S": busy_at_equilibrium(base) / gamma,
    })
    return rows


def _convergence_rows(spec: ExperimentSpec, jobs) -> list[dict]:
    lam, mu, gamma, w = spec.get("lambda"), spec.get("mu"), spec.get("gamma"), spec.get("w")
    p = SystemParams(lam=lam, mu=mu, gamma=gamma, w=w)
    sizes = spec.get("convergence_n_devices")
    device_time = spec.get("convergence_device_time")
    reps = spec.get("convergence_replications")
    warmup = spec.get("convergence_warmup")
    # equal simulated device-time per size, so noise shrinks with N like the bias
    horizons = {n: max(warmup + 1000.0, device_time / (n * reps)) for n in sizes}
    rows = []
    for row in estimate_rate_of_convergence(p, sizes, reps, spec.seed, horizons, warmup, jobs):
        rows.append({
            "n_devices": row.n_devices, "m_channels": row.m_channels, "lambda": lam, "mu": mu,
            "gamma": gamma, "w": w, "replications": reps, "horizon": row.horizon,
            "warmup": row.warmup, "seed": spec.seed,
            "dev_x_I": row.deviation[0], "dev_x_W": row.deviation[1],
            "dev_x_S": row.deviation[2], "stderr_x_I": row.stderr[0],
            "stderr_x_W": row.stderr[1], "stderr_x_S": row.stderr[2],
        })
    return rows


def run_fig4_table1(spec: ExperimentSpec, jobs: int | None = 1) -> dict[str, list[dict]]:
    """Density trajectories against the ODE, the stationary AoI table, and
    the distance of the stationary fractions from equilibrium per N."""
    return {"trajectories": _fig4_rows(spec, jobs), "table1": _table1_rows(spec, jobs),
            "convergence": _convergence_rows(spec, jobs)}


# ---------------------------------------------------------------- fig5

def run_fig5(spec: ExperimentSpec, jobs: int | None = 1) -> dict[str, list[dict]]:
    """Best-response iteration traces, one block per starting rate."""
    p = SystemParams(lam=spec.get("lambda"), mu=spec.get("mu"), gamma=spec.get("gamma"),
                     **spec.costs())
    satisfied, value, b = convergence_condition(p)
    outcome = classify_mfe(p)
    rows = []
    for w0 in spec.get("w0"):
        trace = fixed_point_iterate(p, w0, spec.get("max_iters"))
        for step, row in zip(trace.steps, trace.rows()):
            finite = not is_infinite(step.w)
            rows.append({
                "w0": w0, **row,
                "contraction": sensitivity(step.w, p)[2] if finite else math.nan,
                "terminal": trace.terminal.value, "case": outcome.case_tag.value,
                "w_star": outcome.w_star if outcome.w_star is not None else math.nan,
                "lambda": p.lam, "mu": p.mu, "gamma": p.gamma, **_cost_columns(p),
                "condition_value": value, "condition_b": b,
                "condition_satisfied": int(satisfied),
            })
    return {"": rows}


# ---------------------------------------------------------------- fig6 / fig7 / fig8

def policy_point(p: SystemParams, w: float) -> dict:
    """Mean-field operating point and metrics when every device uses ``w``."""
    q = p.with_(w=w)
    theta = busy_at_equilibrium(q)
    k = equilibrium_effective_rate(q)
    wp = analytic.aoi(WP, p.lam, p.mu, k)
    wop = analytic.aoi(WOP, p.lam, p.mu, k)
    return {
        "w": w, "theta": theta, "k": k,
        "avg_aoi_wp": wp.avg_aoi, "peak_aoi_wp": wp.avg_peak_aoi,
        "avg_aoi_wop": wop.avg_aoi, "peak_aoi_wop": wop.avg_peak_aoi,
        "energy": analytic.attempt_energy_cost(p.lam, p.mu, k, theta, p.c_sense, p.c_transmit),
        "energy_time": analytic.energy_cost(p.lam, p.mu, k, p.c_sense, p.c_transmit),
    }


def _sweep_params(spec: ExperimentSpec, sweep: str, value: float, gamma: float) -> SystemParams:
    if sweep == "lambda":
        return SystemParams(lam=value, mu=spec.get("mu"), gamma=gamma, **spec.costs())
    if sweep == "mu":
        return SystemParams(lam=spec.get("lambda"), mu=value, gamma=gamma, **spec.costs())
    raise DomainError(f"sweep must be 'lambda' or 'mu', got {sweep!r}")


def _mfg_row(p: SystemParams, sweep: str) -> dict:
    outcome = classify_mfe(p)
    if outcome.case_tag is MfeCase.CASE3:
        raise DomainError(f"no MFE at {p}")
    return {"sweep": sweep, "lambda": p.lam, "mu": p.mu, "gamma": p.gamma, **_cost_columns(p),
            "case": outcome.case_tag.value, **policy_point(p, outcome.w_star)}


def run_fig6_fig7(spec: ExperimentSpec, jobs: int | None = 1) -> dict[str, list[dict]]:
    """MFE outcome and metrics over lambda and mu sweeps for each gamma."""
    rows = []
    for sweep in spec.get("sweeps"):
        for gamma in spec.get("gamma"):
            points = [_sweep_params(spec, sweep, v, gamma) for v in spec.get("grid")]
            rows += ordered_map(partial(_mfg_row, sweep=sweep), points, jobs)
    return {"": rows}


def _baseline_rows(p: SystemParams, sweep: str) -> list[dict]:
    mfg = _mfg_row(p, sweep)
    rows = [{**mfg, "policy": "mfg", "mfg_gain_avg_wp": 0.0}]
    for policy, w in (("fixed", 1.0), ("dynamic", max(p.lam, p.mu))):
        point = policy_point(p, w)
        rows.append({"sweep": sweep, "lambda": p.lam, "mu": p.mu, "gamma": p.gamma,
                     **_cost_columns(p), "case": mfg["case"], **point, "policy": policy,
                     "mfg_gain_avg_wp": 1 - mfg["avg_aoi_wp"] / point["avg_aoi_wp"]})
    return rows


def run_fig8_baselines(spec: ExperimentSpec, jobs: int | None = 1) -> dict[str, list[dict]]:
    """MFG against a fixed rate w=1 and the dynamic rate w=max(lambda, mu).

    ``mfg_gain_avg_wp`` is the relative reduction 1 - MFG/baseline of the
    WP average AoI.
    """
    rows = []
    for sweep in spec.get("sweeps"):
        points = [_sweep_params(spec, sweep, v, spec.get("gamma")) for v in spec.get("grid")]
        for block in ordered_map(partial(_baseline_rows, sweep=sweep), points, jobs):
            rows += block
    return {"": rows}


# ---------------------------------------------------------------- registry and output

@dataclass(frozen=True)
class Recipe:
    runner: Callable[[ExperimentSpec, int | None], dict[str, list[dict]]]
    defaults: dict
    description: str

    @property
    def grid_keys(self):
        return self.defaults.keys()


_COSTS = {"c_sense": DEFAULT_C_SENSE, "c_transmit": DEFAULT_C_TRANSMIT,
          "c_budget": DEFAULT_C_BUDGET}

REGISTRY: dict[str, Recipe] = {
    "fig3": Recipe(run_fig3, {
        "lambda": tuple(round(0.1 * i, 10) for i in range(1, 11)), "mu": 1.0, "k": 2.0,
        "n_arrivals": 50_000,
    }, "single-device AoI: simulation vs closed forms"),
    "fig4_table1": Recipe(run_fig4_table1, {
        "lambda": 0.8, "mu": 1.0, "gamma": 2.0, "w": 2.0, "n_devices": (10, 100, 1000),
        "horizon": 10.0, "sample_dt": 0.1,
        "table_w": 1.0, "table_n_devices": (10, 20, 50, 100),
        "table_horizon": 1000.0, "table_warmup": 500.0,
        "convergence_n_devices": (10, 100, 1000), "convergence_replications": 20,
        "convergence_device_time": 4.0e7, "convergence_warmup": 100.0,
    }, "mean-field accuracy: trajectories, stationary AoI table, O(1/N) check"),
    "fig5": Recipe(run_fig5, {
        "lambda": 0.8, "mu": 1.0, "gamma": 5.0, "w0": (1.0,), "max_iters": 200, **_COSTS,
    }, "best-response iteration towards the MFE"),
    "fig6_fig7": Recipe(run_fig6_fig7, {
        "lambda": 0.8, "mu": 1.0, "gamma": (2.0, 5.0), "grid": sweep_grid(),
        "sweeps": ("lambda", "mu"), **_COSTS,
    }, "MFE classification and performance over lambda and mu"),
    "fig8_baselines": Recipe(run_fig8_baselines, {
        "lambda": 0.8, "mu": 1.0, "gamma": 5.0, "grid": sweep_grid(),
        "sweeps": ("lambda", "mu"), **_COSTS,
    }, "MFG against fixed and dynamic waiting-rate baselines"),
}


def output_name(name: str, seed: int, part: str, suffix: str = ".csv") -> str:
    stem = f"{name}_{seed}" if not part else f"{name}_{seed}_{part}"
    return stem + suffix


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_rows(path: Path, rows: list[dict]) -> None:
    columns = list(rows[0]) if rows else []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n", restval="")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(v) for k, v in row.items()})


def write_dat(path: Path, rows: list[dict]) -> None:
    """Whitespace-separated mirror with a commented header (gnuplot style)."""
    columns = list(rows[0]) if rows else []
    with open(path, "w") as fh:
        fh.write("# " + " ".join(columns) + "\n")
        for row in rows:
            cells = (_cell(row.get(c)) for c in columns)
            fh.write(" ".join(str(c) if c != "" else "nan" for c in cells) + "\n")


def sha256_of(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_experiment(spec: ExperimentSpec, jobs: int | None = 1) -> list[Path]:
    """Run a registered recipe, write its files and a hash manifest; returns
    the written paths, manifest last."""
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    parts = REGISTRY[spec.name].runner(spec, jobs)
    written = []
    for part, rows in parts.items():
        path = out / output_name(spec.name, spec.seed, part)
        write_rows(path, rows)
        written.append(path)
        if spec.dat:
            dat = out / output_name(spec.name, spec.seed, part, ".dat")
            write_dat(dat, rows)
            written.append(dat)
    manifest = out / output_name(spec.name, spec.seed, "", ".manifest")
    manifest.write_text("".join(f"{sha256_of(p)}  {p.name}\n" for p in written))
    written.append(manifest)
    return written


def experiment_names() -> list[str]:
    return list(REGISTRY)


__all__ = [
    "ExperimentSpec", "REGISTRY", "Recipe", "experiment_names", "output_name",
    "policy_point", "run_experiment", "run_fig3", "run_fig4_table1", "run_fig5",
    "run_fig6_fig7", "run_fig8_baselines", "sha256_of", "sweep_grid", "write_rows",
]
