"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 mathematical-invariant failure,
3 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
import time

import numpy as np

from carq.dynamics import EnumerationCapError
from carq.fock import (
    CAR_TOL,
    FockSystem,
    build_fock_system,
    creation_via_antisymmetrizer,
    verify_car_relations,
)
from carq.kernel import (
    KernelInvariantError,
    entropy_series,
    rate_estimate,
)
from carq.linalg import dagger, max_abs
from carq.model import CLAIM_TOL, binary_entropy, kernel_claims, two_level_scenario
from carq.optimize import DEFAULT_POINTS, BudgetError, FamilyError, sup_over_family
from carq.scenario import ScenarioError, load_scenario

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT, EXIT_CAP = 0, 1, 2, 3
STDOUT_ROW_CAP = 4096
ANTISYM_MAX_MODES = 3
SERIES_HEADER = ["n", "S_n", "S_n_over_n", "delta_S_n"]

log = logging.getLogger("carq")


def _fmt(x: float) -> str:
    return repr(float(x))


def _configure_logging():
    level = os.environ.get("CARQ_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def write_series_csv(path, series, scale: float = 1.0):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_HEADER)
        for n, (s, r, d) in enumerate(zip(series.s, series.rates, series.diffs), start=1):
            w.writerow([n, _fmt(s * scale), _fmt(r * scale), _fmt(d * scale)])


def write_kernel_csv(path, table):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["word", "P"])
        for word, p in table.rows():
            w.writerow([word, _fmt(p)])


def print_kernel(table, out=None):
    out = sys.stdout if out is None else out
    if len(table) > STDOUT_ROW_CAP:
        print(f"kernel table at n={table.n} has {len(table)} rows; written to CSV only", file=out)
        return
    print(f"kernel table n={table.n} ({len(table)} nonzero words, pruned mass {table.pruned_mass:.3e})", file=out)
    for word, p in table.rows():
        print(f"  {word:<24s} {p:.15g}", file=out)


# --- verify-car --------------------------------------------------------------


def _inject_fault(sys_: FockSystem) -> FockSystem:
    a = [x.copy() for x in sys_.annihilators]
    a[0][0, 0] += 1e-6
    return FockSystem(sys_.modes, sys_.dim, sys_.basis, tuple(a), tuple(dagger(x) for x in a))


def antisymmetrizer_crosscheck(sys_: FockSystem) -> float:
    """Max deviation between the two creation routes over basis modes and states."""
    worst = 0.0
    eye = np.eye(sys_.modes)
    for i in range(sys_.modes):
        for b in range(sys_.dim):
            x = np.zeros(sys_.dim, dtype=np.complex128)
            x[b] = 1.0
            lhs = creation_via_antisymmetrizer(sys_, eye[i], x)
            worst = max(worst, max_abs(lhs - sys_.creator(eye[i]) @ x))
    return worst


def cmd_verify_car(args) -> int:
    try:
        sys_ = build_fock_system(args.modes, verify=False)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.inject_fault:
        sys_ = _inject_fault(sys_)
    t0 = time.perf_counter()
    report = verify_car_relations(sys_, args.tol)
    print(report.summary())
    pauli = max(max(max_abs(a @ a), max_abs(c @ c)) for a, c in zip(sys_.annihilators, sys_.creators))
    print(f"Pauli exclusion max |a_i^2|, |(a_i^*)^2|: {pauli:.3e}")
    ok = report.passed and pauli <= args.tol
    if sys_.modes <= ANTISYM_MAX_MODES:
        dev = antisymmetrizer_crosscheck(sys_)
        print(f"antisymmetrizer route vs occupation route: {dev:.3e}")
        if dev > 1e-10:
            print("FAIL creation operators disagree between routes", file=sys.stderr)
            ok = False
    else:
        print(f"antisymmetrizer route: skipped for modes > {ANTISYM_MAX_MODES}")
    print(f"elapsed {time.perf_counter() - t0:.3f}s")
    if not ok:
        for i, j, name, dev in report.failures:
            print(f"FAIL relation {name} at (i={i}, j={j}): deviation {dev:.3e}", file=sys.stderr)
        return EXIT_INVARIANT
    print("PASS")
    return EXIT_OK


# --- entropy -----------------------------------------------------------------


def _load(args):
    spec = load_scenario(args.scenario)
    s = spec.scenario
    if getattr(args, "horizon", None) is not None:
        if args.horizon < 1:
            raise ScenarioError("--horizon", f"must be >= 1, got {args.horizon}")
        s.horizon = args.horizon
    if getattr(args, "prune", None) is not None:
        if args.prune < 0:
            raise ScenarioError("--prune", f"must be >= 0, got {args.prune}")
        s.prune = args.prune
    if getattr(args, "cap", None) is not None:
        if args.cap < 1:
            raise ScenarioError("--cap", f"must be >= 1, got {args.cap}")
        s.cap = args.cap
    return spec


def cmd_entropy(args) -> int:
    t0 = time.perf_counter()
    spec = _load(args)
    s = spec.scenario
    if s.partition is None:
        raise ScenarioError("partition", "the entropy command needs a partition")
    bits = args.bits or spec.log_base == "2"
    scale = 1 / math.log(2) if bits else 1.0
    unit = "bits" if bits else "nats"
    series = entropy_series(s, threads=args.threads)
    bad = series.bound_violations()
    if bad:
        raise KernelInvariantError("; ".join(bad))
    if args.csv:
        write_series_csv(args.csv, series, scale)
    final = series.tables[-1]
    if args.kernel_csv:
        write_kernel_csv(args.kernel_csv, final)
    if args.show_kernel:
        print_kernel(final)
    print(f"variant={s.variant} horizon={series.horizon} symbols={s.partition.size} unit={unit}")
    print(f"{'n':>4s} {'S_n':>20s} {'S_n/n':>20s} {'delta S_n':>20s}")
    for n, (sn, r, d) in enumerate(zip(series.s, series.rates, series.diffs), start=1):
        print(f"{n:4d} {sn * scale:20.15f} {r * scale:20.15f} {d * scale:20.15f}")
    if series.horizon >= 3:
        rate, diag = rate_estimate(series)
        print(f"rate estimate (tail increment S_N - S_N-1): {rate * scale:.15g} {unit}")
        print(f"secondary estimate S_N / N: {diag['mean_rate'] * scale:.15g} {unit}")
    else:
        print("rate estimate needs horizon >= 3")
    print(f"pruned mass at N: {final.pruned_mass:.3e}; elapsed {time.perf_counter() - t0:.3f}s")
    return EXIT_OK


# --- reproduce-paper ---------------------------------------------------------


def cmd_reproduce_paper(args) -> int:
    lam = args.lam
    if not 0.0 <= lam <= 1.0:
        print(f"error: --lambda must lie in [0, 1], got {lam}", file=sys.stderr)
        return EXIT_INPUT
    if args.horizon < 3:
        print("error: --horizon must be >= 3 for a rate estimate", file=sys.stderr)
        return EXIT_INPUT
    s = two_level_scenario(lam, args.horizon, args.variant)
    series = entropy_series(s, threads=args.threads)
    tables = series.tables
    print_kernel(tables[-1])
    failures = []
    for t in tables:
        for claim, dev, ok in kernel_claims(t, lam, args.tol):
            if not ok:
                failures.append(f"n={t.n}: {claim} (deviation {dev:.3e})")
    h = binary_entropy(lam)
    s_dev = float(np.abs(series.s - h).max())
    if s_dev > 1e-10:
        failures.append(f"S_n constant at {h!r} (max deviation {s_dev:.3e})")
    rate, _ = rate_estimate(series)
    if abs(rate) > args.tol:
        failures.append(f"rate = 0 (got {rate!r})")
    if args.csv:
        write_series_csv(args.csv, series)
    print(f"lambda={lam} horizon={args.horizon} variant={args.variant}")
    print(f"S_n = {float(series.s[-1])!r} for all n (expected {h!r}, max deviation {s_dev:.3e})")
    print(f"rate estimate = {rate!r}")
    if failures:
        for f in failures:
            print(f"FAIL {f}", file=sys.stderr)
        return EXIT_INVARIANT
    print("PASS kernel claims hold at every horizon; rate 0")
    return EXIT_OK


# --- optimize ----------------------------------------------------------------


def cmd_optimize(args) -> int:
    spec = _load(args)
    if spec.family is None:
        raise ScenarioError("family", "the optimize command needs a family")
    if spec.scenario.horizon < 3:
        raise ScenarioError("horizon", "must be >= 3 for a rate estimate")
    points = args.points or spec.family_points or DEFAULT_POINTS
    res = sup_over_family(spec.scenario, spec.family, budget=args.budget, points=points, threads=args.threads)
    print(f"family={spec.family.name} params={spec.family.n_params} points/axis={points} evaluations={res.evaluations}")
    for k, ev in enumerate(res.trace):
        params = ", ".join(f"{x:.12g}" for x in ev.params)
        print(f"{k:5d} {ev.stage:<10s} ({params}) rate={ev.rate!r}")
    if args.trace_csv:
        with open(args.trace_csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["eval", "stage"] + [f"p{i}" for i in range(spec.family.n_params)] + ["rate"])
            for k, ev in enumerate(res.trace):
                w.writerow([k, ev.stage] + [_fmt(x) for x in ev.params] + [_fmt(ev.rate)])
    grid_max = max(ev.rate for ev in res.trace if ev.stage == "grid")
    print(f"grid best: {res.grid_best_params} rate={res.grid_best_rate!r}")
    print(f"best: {res.best_params} rate={res.best_rate!r} (>= grid max {grid_max!r})")
    if res.best_rate < max(ev.rate for ev in res.trace):
        print("FAIL best is below an evaluated value", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


# --- wiring ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads for kernel enumeration (results do not depend on it)")

    parser = argparse.ArgumentParser(prog="carq", description="Dynamical entropy of quantum Markov chains on CAR algebras.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-car", parents=[common], help="check the CAR relations of the m-mode generators")
    p.add_argument("--modes", type=int, required=True)
    p.add_argument("--tol", type=float, default=CAR_TOL)
    p.add_argument("--inject-fault", action="store_true", help="corrupt a_0 to exercise the failure path")
    p.set_defaults(func=cmd_verify_car)

    p = sub.add_parser("entropy", parents=[common], help="entropy sequence and rate estimate for a scenario file")
    p.add_argument("scenario")
    p.add_argument("--horizon", type=int)
    p.add_argument("--prune", type=float)
    p.add_argument("--cap", type=int)
    p.add_argument("--csv")
    p.add_argument("--kernel-csv")
    p.add_argument("--show-kernel", action="store_true")
    p.add_argument("--bits", action="store_true", help="report entropies in bits")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("reproduce-paper", parents=[common], help="two-level phase-rotation model with its kernel claims")
    p.add_argument("--lambda", dest="lam", type=float, default=0.3)
    p.add_argument("--horizon", type=int, default=8)
    p.add_argument("--variant", choices=["aow", "car"], default="car")
    p.add_argument("--tol", type=float, default=CLAIM_TOL)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_reproduce_paper)

    p = sub.add_parser("optimize", parents=[common], help="sup of the rate estimate over a partition family")
    p.add_argument("scenario")
    p.add_argument("--budget", type=int)
    p.add_argument("--points", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--cap", type=int)
    p.add_argument("--trace-csv")
    p.set_defaults(func=cmd_optimize)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    log.info("command %s", args.command)
    try:
        return args.func(args)
    except (ScenarioError, FamilyError, BudgetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EnumerationCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (KernelInvariantError, ArithmeticError) as exc:
        print(f"error: invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
