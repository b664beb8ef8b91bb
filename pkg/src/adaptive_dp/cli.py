"""Command-line front end.

Exit codes: 0 admitted / coverage held, 1 rejected / coverage failed,
2 usage or validation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from dataclasses import asdict
from typing import Sequence

import numpy as np

from . import ledger
from .core import FilterConfig, PrivacyError, PrivacySpend, SpendKind
from .filters import filter_threshold, lower_order_gap, y_star, y_star_printed
from .mechanisms import Mechanism, parse_strategy
from .montecarlo import ExperimentConfig, run_experiment
from .odometers import Family, OdometerSpec, odometer_values
from .report import coverage_threshold, dumps_record

EXIT_OK, EXIT_REJECTED, EXIT_USAGE = 0, 1, 2
SEED_ENV = "PRIVACY_LEDGER_SEED"
CURVE_HEADER = ["v", "filter", "mixture", "stitched", "rogers"]
GAP_HEADER = ["epsilon", "half_eps_sq", "adv_lower_order"]


class UsageError(Exception):
    pass


def fmt(x: float) -> str:
    x = float(x)
    if math.isinf(x) and x > 0:
        return "inf"
    return f"{x:.9g}"


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _budget_args(p: argparse.ArgumentParser, need_epsilon: bool = True) -> None:
    p.add_argument("--epsilon-budget", "--budget-epsilon", type=float, required=need_epsilon,
                   dest="epsilon_budget", help="global epsilon of the filter")
    p.add_argument("--delta-prime", type=float, default=1e-6)
    p.add_argument("--delta-dprime", type=float, default=0.0)


def _candidate_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--kind", choices=[k.value for k in SpendKind], default="dp")


def _grid_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--v-min", type=float)
    p.add_argument("--v-max", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--spacing", choices=["log", "linear"], default="log")
    p.add_argument("--values", help="explicit comma-separated grid, overrides the range flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptive-dp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="would the filter admit this spend?")
    p.add_argument("--ledger", required=True)
    _candidate_args(p)
    _budget_args(p)

    p = sub.add_parser("spend", help="append a spend if the filter admits it")
    p.add_argument("--ledger", required=True)
    _candidate_args(p)
    p.add_argument("--timestamp")
    _budget_args(p)

    p = sub.add_parser("status", help="ledger totals, remaining filter room, odometer values")
    p.add_argument("--ledger", required=True)
    _budget_args(p)
    p.add_argument("--filter-epsilon", type=float)
    p.add_argument("--mixture-rho", type=float)
    p.add_argument("--stitched-v0", type=float)
    p.add_argument("--rogers-size", type=int)

    p = sub.add_parser("curves", help="odometer curves (or the lower-order gap curve) as CSV")
    p.add_argument("--delta-prime", type=float, default=1e-6)
    p.add_argument("--filter-epsilon", type=float, default=8.0)
    p.add_argument("--mixture-rho", type=float, default=0.01)
    p.add_argument("--stitched-v0", type=float, default=0.005)
    p.add_argument("--rogers-size", type=int, help="dataset size for the rogers odometer (required)")
    p.add_argument("--gap", action="store_true",
                   help="emit eps^2/2 against eps tanh(eps/2) over an epsilon grid instead")
    _grid_args(p)
    p.add_argument("--output", "-o", default="-")

    p = sub.add_parser("simulate", help="Monte-Carlo coverage of a filter or odometer")
    p.add_argument("--mechanism", choices=[m.value for m in Mechanism], default="rr")
    p.add_argument("--strategy", default="constant:0.1",
                   help="constant:EPS | frontloaded:E1,E2,... | sign:LOW,HIGH")
    p.add_argument("--guard", default=None,
                   choices=["filter", "mixture", "stitched", "filter-odometer", "rogers"])
    p.add_argument("--epsilon-budget", "--budget-epsilon", dest="epsilon_budget", type=float, default=1.0)
    p.add_argument("--delta-prime", type=float, default=0.05)
    p.add_argument("--delta-dprime", type=float, default=0.0)
    p.add_argument("--round-delta", type=float, default=0.0)
    p.add_argument("--rho", type=float, default=0.01)
    p.add_argument("--v0", type=float, default=0.005)
    p.add_argument("--filter-epsilon", type=float, default=8.0)
    p.add_argument("--rogers-size", type=int, default=10_000)
    p.add_argument("--horizon", type=int, default=1000)
    p.add_argument("--max-v", type=float)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--stress", action="store_true",
                   help="halve the concentration term of an odometer guard (negative control)")

    p = sub.add_parser("ystar", help="intrinsic time where the filter threshold hits epsilon")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta-prime", type=float, default=1e-6)
    p.add_argument("--printed", action="store_true",
                   help="also report the '+eps' radicand variant for comparison")
    return parser


def _filter_config(args) -> FilterConfig:
    return FilterConfig(args.epsilon_budget, args.delta_prime, args.delta_dprime)


def _candidate(args) -> PrivacySpend:
    return PrivacySpend(SpendKind(args.kind), args.epsilon, args.delta)


def _emit(obj) -> None:
    sys.stdout.write(dumps_record(obj) + "\n")


def cmd_check(args) -> int:
    decision = ledger.check(ledger.ingest(args.ledger), _candidate(args), _filter_config(args))
    _emit(asdict(decision))
    return EXIT_OK if decision.admitted else EXIT_REJECTED


def cmd_spend(args) -> int:
    decision, rec = ledger.spend_if_admitted(args.ledger, _candidate(args), _filter_config(args), args.timestamp)
    out = asdict(decision)
    out["index"] = None if rec is None else rec.index
    _emit(out)
    return EXIT_OK if decision.admitted else EXIT_REJECTED


def cmd_status(args) -> int:
    cfg = _filter_config(args)
    specs = []
    if args.filter_epsilon is not None:
        specs.append(OdometerSpec.filter(args.filter_epsilon, cfg.delta_prime, cfg.delta_dprime))
    if args.mixture_rho is not None:
        specs.append(OdometerSpec.mixture(args.mixture_rho, cfg.delta_prime, cfg.delta_dprime))
    if args.stitched_v0 is not None:
        specs.append(OdometerSpec.stitched(args.stitched_v0, cfg.delta_prime, cfg.delta_dprime))
    if args.rogers_size is not None:
        specs.append(OdometerSpec.rogers(args.rogers_size, cfg.delta_prime, cfg.delta_dprime))
    _emit(ledger.status(ledger.read_records(args.ledger), cfg, specs).as_dict())
    return EXIT_OK


def make_grid(lo: float, hi: float, points: int, spacing: str) -> np.ndarray:
    if points < 1:
        raise UsageError("--points must be at least 1")
    if hi < lo:
        raise UsageError("grid maximum is below its minimum")
    if points == 1:
        return np.array([lo])
    if spacing == "log":
        if lo <= 0:
            raise UsageError("log spacing needs a positive minimum")
        return np.geomspace(lo, hi, points)
    return np.linspace(lo, hi, points)


def _grid(args, lo: float, hi: float, points: int) -> np.ndarray:
    if args.values:
        try:
            values = sorted(float(x) for x in args.values.split(",") if x.strip())
        except ValueError:
            raise UsageError(f"bad --values {args.values!r}") from None
        if not values:
            raise UsageError("--values is empty")
        return np.array(values)
    return make_grid(
        lo if args.v_min is None else args.v_min,
        hi if args.v_max is None else args.v_max,
        points if args.points is None else args.points,
        args.spacing,
    )


def curve_table(specs: dict[Family, OdometerSpec], grid: np.ndarray) -> list[list[str]]:
    cols = [odometer_values(specs[Family(name)], grid) for name in CURVE_HEADER[1:]]
    return [[fmt(v)] + [fmt(c[i]) for c in cols] for i, v in enumerate(grid)]


def gap_table(eps_grid: np.ndarray) -> list[list[str]]:
    half = 0.5 * eps_grid * eps_grid
    adv = half - lower_order_gap(eps_grid)
    return [[fmt(e), fmt(h), fmt(a)] for e, h, a in zip(eps_grid, half, adv)]


def _write_csv(path: str, header: Sequence[str], rows: list[list[str]]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    if path == "-":
        sys.stdout.write(buf.getvalue())
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None


def cmd_curves(args) -> int:
    if args.gap:
        grid = _grid(args, 0.01, 1.0, 100)
        if np.any(grid <= 0):
            raise UsageError("gap grid must be positive")
        _write_csv(args.output, GAP_HEADER, gap_table(grid))
        return EXIT_OK
    if args.rogers_size is None:
        raise UsageError("--rogers-size is required for odometer curves")
    grid = _grid(args, 0.01, 25.0, 200)
    dp = args.delta_prime
    specs = {
        Family.FILTER: OdometerSpec.filter(args.filter_epsilon, dp),
        Family.MIXTURE: OdometerSpec.mixture(args.mixture_rho, dp),
        Family.STITCHED: OdometerSpec.stitched(args.stitched_v0, dp),
        Family.ROGERS: OdometerSpec.rogers(args.rogers_size, dp),
    }
    _write_csv(args.output, CURVE_HEADER, curve_table(specs, grid))
    return EXIT_OK


def experiment_from_args(args) -> ExperimentConfig:
    dp, ddp = args.delta_prime, args.delta_dprime
    scale = 0.5 if args.stress else 1.0
    guard = args.guard or ("mixture" if args.stress else "filter")
    if args.stress and guard == "filter":
        raise UsageError("--stress applies to odometer guards")
    guards = {
        "filter": lambda: FilterConfig(args.epsilon_budget, dp, ddp),
        "mixture": lambda: OdometerSpec(Family.MIXTURE, args.rho, dp, ddp, scale),
        "stitched": lambda: OdometerSpec(Family.STITCHED, args.v0, dp, ddp, scale),
        "filter-odometer": lambda: OdometerSpec(Family.FILTER, args.filter_epsilon, dp, ddp, scale),
        "rogers": lambda: OdometerSpec(Family.ROGERS, args.rogers_size, dp, ddp, scale),
    }
    seed = _default_seed() if args.seed is None else args.seed
    return ExperimentConfig(
        strategy=parse_strategy(args.strategy),
        mechanism=Mechanism(args.mechanism),
        guard=guards[guard](),
        horizon=args.horizon,
        trials=args.trials,
        seed=seed,
        round_delta=args.round_delta,
        max_v=args.max_v,
    )


def cmd_simulate(args) -> int:
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    cfg = experiment_from_args(args)
    report = run_experiment(cfg, workers=args.workers)
    sys.stdout.write(report.to_json() + "\n")
    limit = coverage_threshold(cfg.target, cfg.trials)
    print(f"target={cfg.target:.9g} limit={limit:.9g} rate={report.rate:.9g}", file=sys.stderr)
    return EXIT_OK if report.rate <= limit else EXIT_REJECTED


def cmd_ystar(args) -> int:
    y = y_star(args.epsilon, args.delta_prime)
    out = {"y_star": y, "f_at_y_star": filter_threshold(y, args.delta_prime)}
    if args.printed:
        yp = y_star_printed(args.epsilon, args.delta_prime)
        out["y_star_printed"] = yp
        out["f_at_y_star_printed"] = filter_threshold(yp, args.delta_prime)
    _emit(out)
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "spend": cmd_spend,
    "status": cmd_status,
    "curves": cmd_curves,
    "simulate": cmd_simulate,
    "ystar": cmd_ystar,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, PrivacyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
