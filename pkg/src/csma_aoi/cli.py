"""Command-line interface.

Machine-first output: CSV on stdout (header plus rows), floats printed with
``repr`` so values round-trip exactly. ``--pretty`` aligns columns instead.
Exit status is 0 on success, 2 on usage or domain errors, 1 otherwise.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path

from . import analytic
from .experiments import ExperimentSpec, experiment_names, run_experiment, sha256_of
from .game import classify_mfe, convergence_condition, fixed_point_iterate, theta_star
from .meanfield import (busy_at_equilibrium, equilibrium, equilibrium_effective_rate, integrate,
                        stability_rate)
from .model import (DEFAULT_C_BUDGET, DEFAULT_C_SENSE, DEFAULT_C_TRANSMIT, INFINITY, DomainError,
                    MeanFieldState, Scheme, SystemParams, validate)
from .parallel import default_jobs
from .sim import replicate_population, simulate_density, simulate_device
from .sim.density import density_mean_trajectory

# Built-in values for keys that may come from flags or the config file.
DEFAULTS = {
    "seed": 0, "out": ".", "replications": 1, "format": "csv", "jobs": None, "pretty": False,
    "lambda": None, "mu": None, "gamma": None, "w": 1.0, "n_devices": None, "m_channels": None,
    "cs": DEFAULT_C_SENSE, "ct": DEFAULT_C_TRANSMIT, "cbudget": DEFAULT_C_BUDGET,
}
_INT_KEYS = {"seed", "replications", "jobs", "n_devices", "m_channels"}
_BOOL_KEYS = {"pretty"}
_STR_KEYS = {"out", "format"}


class UsageError(Exception):
    pass


def rate(text: str) -> float:
    """Parse a rate; accepts ``inf``."""
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _common() -> argparse.ArgumentParser:
    # SUPPRESS keeps flags given before the subcommand from being reset by
    # the subparser's copy of the same option
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    g.add_argument("--out", default=argparse.SUPPRESS, help="output directory for experiment files")
    g.add_argument("--config", default=argparse.SUPPRESS, help="file of 'name = value' lines")
    g.add_argument("--replications", type=int, default=argparse.SUPPRESS)
    g.add_argument("--format", choices=["csv"], default=argparse.SUPPRESS)
    g.add_argument("--jobs", type=int, default=argparse.SUPPRESS,
                   help="worker processes (default: cores)")
    g.add_argument("--pretty", action="store_true", default=argparse.SUPPRESS)
    m = p.add_argument_group("model parameters")
    m.add_argument("--lambda", dest="lambda", type=rate, default=argparse.SUPPRESS)
    m.add_argument("--mu", type=rate, default=argparse.SUPPRESS)
    m.add_argument("--gamma", type=rate, default=argparse.SUPPRESS)
    m.add_argument("--w", type=rate, default=argparse.SUPPRESS, help="waiting rate; 'inf' allowed")
    m.add_argument("--n-devices", dest="n_devices", type=int, default=argparse.SUPPRESS)
    m.add_argument("--m-channels", dest="m_channels", type=int, default=argparse.SUPPRESS)
    m.add_argument("--cs", type=rate, default=argparse.SUPPRESS, help="sensing cost per unit time")
    m.add_argument("--ct", type=rate, default=argparse.SUPPRESS,
                   help="transmission cost per unit time")
    m.add_argument("--cbudget", type=rate, default=argparse.SUPPRESS,
                   help="energy budget per unit time")
    return p


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="csma-aoi", description=__doc__.splitlines()[0],
                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("aoi", parents=[common], help="closed-form AoI at a given k or w")
    p.add_argument("--scheme", default="both", choices=["wp", "wop", "both"])
    p.add_argument("--k", type=rate, default=None, help="effective waiting rate")
    p.add_argument("--k-inf", action="store_true", help="use the infinite-rate limit")

    sub.add_parser("equilibrium", parents=[common], help="mean-field rest point")

    p = sub.add_parser("integrate", parents=[common], help="RK4 trajectory of the ODE")
    p.add_argument("--x0", default="1,0,0", help="initial fractions 'x_I,x_W,x_S'")
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--horizon", type=float, default=200.0)
    p.add_argument("--record-every", type=int, default=100)

    sub.add_parser("mfe", parents=[common], help="classify the mean-field equilibrium")

    p = sub.add_parser("iterate", parents=[common], help="best-response iteration trace")
    p.add_argument("--w0", type=rate, default=1.0)
    p.add_argument("--max-iters", type=int, default=200)

    p = sub.add_parser("simulate", parents=[common], help="stochastic simulation")
    p.add_argument("kind", choices=["device", "population", "density"])
    p.add_argument("--scheme", default="both", choices=["wp", "wop", "both"])
    p.add_argument("--k", type=rate, default=None, help="effective rate (device)")
    p.add_argument("--n-arrivals", type=int, default=50_000)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--warmup", type=float, default=None)
    p.add_argument("--sample-dt", type=float, default=0.1)

    p = sub.add_parser("experiment", parents=[common], help="run a named experiment")
    p.add_argument("name", choices=experiment_names())
    p.add_argument("--dat", action="store_true", help="also write .dat mirrors")

    sub.add_parser("check-convergence", parents=[common],
                   help="sufficient condition for the iteration to converge")
    return parser


def read_config(path: str) -> dict:
    """Flat ``name = value`` file; ``#`` starts a comment. Unknown keys are
    errors."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'name = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _convert(key, value, f"{path}:{lineno}")
    return values


def _convert(key: str, value: str, where: str):
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _BOOL_KEYS:
            if value.lower() not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(value)
            return value.lower() in ("1", "true", "yes")
        if key in _STR_KEYS:
            return value
        return float(value)
    except ValueError:
        raise UsageError(f"{where}: bad value for {key!r}: {value!r}") from None


def resolve(args: argparse.Namespace) -> dict:
    """Merge built-in defaults, the config file, and flags (flags win)."""
    merged = dict(DEFAULTS)
    config = getattr(args, "config", None)
    if config:
        merged.update(read_config(config))
    for key in DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    if merged["jobs"] is None:
        merged["jobs"] = default_jobs()
    if merged["replications"] < 1:
        raise DomainError("replications must be >= 1")
    if merged["jobs"] < 1:
        raise DomainError("jobs must be >= 1")
    return merged


def params_from(cfg: dict, need: tuple[str, ...] = ("lambda", "mu", "gamma")) -> SystemParams:
    n, m = cfg["n_devices"], cfg["m_channels"]
    gamma = cfg["gamma"]
    if gamma is None and n is not None and m is not None and m > 0:
        gamma = n / m
    for key, value in (("lambda", cfg["lambda"]), ("mu", cfg["mu"]), ("gamma", gamma)):
        if key in need and value is None:
            raise UsageError(f"missing --{key}")
    return validate(SystemParams(
        lam=cfg["lambda"], mu=cfg["mu"], gamma=gamma if gamma is not None else 1.0, w=cfg["w"],
        n_devices=n, m_channels=m, c_sense=cfg["cs"], c_transmit=cfg["ct"],
        c_budget=cfg["cbudget"]))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "item"):
        return _fmt(value.item())
    return str(value)


def emit(rows: list[dict], pretty: bool, stream=None) -> None:
    stream = stream or sys.stdout
    if not rows:
        return
    columns = list(rows[0])
    table = [[_fmt(r.get(c)) for c in columns] for r in rows]
    if pretty:
        widths = [max(len(c), *(len(row[i]) for row in table)) for i, c in enumerate(columns)]
        stream.write("  ".join(c.rjust(wd) for c, wd in zip(columns, widths)) + "\n")
        for row in table:
            stream.write("  ".join(v.rjust(wd) for v, wd in zip(row, widths)) + "\n")
        return
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(table)
    stream.write(buf.getvalue())


def _schemes(choice: str) -> list[Scheme]:
    if choice == "both":
        return [Scheme.WITH_PREEMPTION, Scheme.WITHOUT_PREEMPTION]
    return [Scheme.parse(choice)]


def cmd_aoi(args, cfg) -> list[dict]:
    if args.k_inf and args.k is not None:
        raise UsageError("--k and --k-inf are mutually exclusive")
    if args.k_inf or args.k is not None:
        p = params_from(cfg, need=("lambda", "mu"))
        k = INFINITY if args.k_inf else args.k
    else:
        p = params_from(cfg)
        k = equilibrium_effective_rate(p)
    rows = []
    for scheme in _schemes(args.scheme):
        pair = analytic.aoi(scheme, p.lam, p.mu, k)
        rows.append({"scheme": scheme.value, "lambda": p.lam, "mu": p.mu, "k": k,
                     "avg_aoi": pair.avg_aoi, "peak_aoi": pair.avg_peak_aoi})
    return rows


def cmd_equilibrium(args, cfg) -> list[dict]:
    p = params_from(cfg)
    x = equilibrium(p)
    row = {"lambda": p.lam, "mu": p.mu, "gamma": p.gamma, "w": p.w,
           "x_I": x.x_idle, "x_W": x.x_wait, "x_S": x.x_service,
           "theta": busy_at_equilibrium(p), "k": equilibrium_effective_rate(p)}
    row["delta"] = stability_rate(p) if p.finite_w else math.nan
    return [row]


def _parse_state(text: str) -> MeanFieldState:
    try:
        parts = [float(s) for s in text.split(",")]
    except ValueError:
        raise UsageError(f"--x0 must be three comma-separated numbers, got {text!r}") from None
    if len(parts) != 3:
        raise UsageError(f"--x0 must be three comma-separated numbers, got {text!r}")
    return MeanFieldState.from_triple(*parts)


def cmd_integrate(args, cfg) -> list[dict]:
    p = params_from(cfg)
    traj = integrate(_parse_state(args.x0), p, args.step, args.horizon, args.record_every)
    return list(traj.rows())


def cmd_mfe(args, cfg) -> list[dict]:
    p = params_from(cfg)
    out = classify_mfe(p)
    pair = out.oscillation_pair or (None, None)
    return [{"case": out.case_tag.value, "theta_star": out.theta_star, "w_star": out.w_star,
             "oscillation_low": pair[0], "oscillation_high": pair[1],
             "theta_star_formula": theta_star(p)}]


def cmd_iterate(args, cfg) -> list[dict]:
    trace = fixed_point_iterate(params_from(cfg), args.w0, args.max_iters)
    return [{**row, "terminal": trace.terminal.value} for row in trace.rows()]


def cmd_check_convergence(args, cfg) -> list[dict]:
    satisfied, value, b = convergence_condition(params_from(cfg))
    return [{"satisfied": satisfied, "value": value, "B": b}]


def cmd_simulate(args, cfg) -> list[dict]:
    reps = cfg["replications"]
    if args.kind == "device":
        p = params_from(cfg, need=("lambda", "mu"))
        if args.k is None:
            raise UsageError("simulate device needs --k")
        rows = []
        for scheme in _schemes(args.scheme):
            for r in range(reps):
                s = simulate_device(scheme, p.lam, p.mu, args.k, args.n_arrivals, cfg["seed"], r,
                                    p.c_sense, p.c_transmit)
                rows.append({"scheme": scheme.value, "lambda": p.lam, "mu": p.mu, "k": args.k,
                             "replication": r, "avg_aoi": s.time_avg_aoi,
                             "peak_aoi": s.mean_peak_aoi, "deliveries": s.delivered_count,
                             "mean_service_time": s.mean_service_time,
                             "mean_interdeparture": s.mean_interdeparture,
                             "second_moment_interdeparture": s.second_moment_interdeparture,
                             "energy": s.energy_rate})
        return rows
    p = params_from(cfg)
    if p.n_devices is None or p.m_channels is None:
        raise UsageError(f"simulate {args.kind} needs --n-devices and --m-channels")
    if args.kind == "population":
        horizon = 1000.0 if args.horizon is None else args.horizon
        summary = replicate_population(p, reps, horizon, args.warmup, cfg["seed"], cfg["jobs"])
        keep = {s.value for s in _schemes(args.scheme)}
        return [row for row in summary.rows() if row["scheme"] in keep]
    horizon = 10.0 if args.horizon is None else args.horizon
    if reps == 1:
        traj = simulate_density(p, horizon, cfg["seed"], 0, args.sample_dt)
    else:
        traj = density_mean_trajectory(p, reps, horizon, cfg["seed"], args.sample_dt,
                                       jobs=cfg["jobs"])
    return list(traj.rows(n_devices=p.n_devices))


def cmd_experiment(args, cfg) -> list[dict]:
    # --replications only overrides the recipe when given explicitly
    explicit = getattr(args, "replications", None)
    config = getattr(args, "config", None)
    if explicit is None and config:
        explicit = read_config(config).get("replications")
    spec = ExperimentSpec(args.name, cfg["seed"], Path(cfg["out"]), explicit, dat=args.dat)
    paths = run_experiment(spec, cfg["jobs"])
    return [{"file": str(path), "sha256": sha256_of(path)} for path in paths]


COMMANDS = {
    "aoi": cmd_aoi, "equilibrium": cmd_equilibrium, "integrate": cmd_integrate, "mfe": cmd_mfe,
    "iterate": cmd_iterate, "simulate": cmd_simulate, "experiment": cmd_experiment,
    "check-convergence": cmd_check_convergence,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve(args)
        rows = COMMANDS[args.command](args, cfg)
    except (UsageError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report and signal an internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    emit(rows, cfg["pretty"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
