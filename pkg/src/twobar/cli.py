"""Command-line front end.

Four subcommands::

    twobar reflect Y.csv L.csv U.csv [--route all] [--tol 1e-9] [--out DIR]
    twobar solve problem.toml [--seed N] [--batch N] [--out-dir DIR]
    twobar verify routes [--trials N] [--seed N] [--tol T]
    twobar simulate problem.toml [--seed N] [--out DIR]

Every file-writing command finishes by writing ``manifest.json`` listing the
command, a digest of its inputs, the seeds used, the tool version, every
output file, and the wall-clock time.  Numeric files use 17 significant
digits, so a rerun with the same digest and seed is byte-identical.

Exit codes: 0 ok, 1 verification suite failure, 2 invalid input,
3 condition-check failure, 4 solver failure.  The default output directory
is ``$TWOBAR_OUT`` if set, else the working directory.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .config import build_problem, config_digest, build_driver_spec, load_config
from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    FormatError,
    GridError,
)
from .regulated import (
    combine,
    format_float,
    path_to_csv_bytes,
    read_path_csv,
    sup_norm_before,
    write_path_csv,
)
from .sde import solve
from .semimartingale import simulate_driver
from .skorokhod_two import (
    check_rp_conditions,
    reflect_composed,
    reflect_explicit,
    reflect_recursive,
)
from .verify import run_suite

EXIT_OK = 0
EXIT_SUITE_FAILURE = 1
EXIT_INVALID_INPUT = 2
EXIT_CONDITION_FAILURE = 3
EXIT_SOLVER_FAILURE = 4

_ROUTES = {"explicit": reflect_explicit, "recursive": reflect_recursive,
           "composed": reflect_composed}


@dataclasses.dataclass(frozen=True)
class RunManifest:
    """Record of one CLI run: what ran, on what, and what it wrote."""

    command: str
    config_digest: str
    seeds: tuple
    version: str
    outputs: tuple
    wall_clock_seconds: float

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _default_out() -> str:
    return os.environ.get("TWOBAR_OUT", ".")


def _write_json(payload, out_dir, name):
    with open(os.path.join(out_dir, name), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _finish(command, digest, seeds, outputs, out_dir, started):
    manifest = RunManifest(command=command, config_digest=digest,
                           seeds=tuple(seeds), version=__version__,
                           outputs=tuple(outputs),
                           wall_clock_seconds=time.perf_counter() - started)
    _write_json(manifest.as_dict(), out_dir, "manifest.json")


def _report_payload(report) -> dict:
    return {
        "ok": report.ok,
        "tol": report.tol,
        "entries": [
            {"name": e.name, "passed": e.passed, "residual": e.residual,
             "witness_times": list(e.witness_times), "note": e.note}
            for e in report.entries
        ],
    }


# ---------------------------------------------------------------------------
# reflect


def _cmd_reflect(args) -> int:
    started = time.perf_counter()
    y = read_path_csv(args.y)
    lower = read_path_csv(args.lower)
    upper = read_path_csv(args.upper)
    digest = hashlib.sha256(path_to_csv_bytes(y) + path_to_csv_bytes(lower)
                            + path_to_csv_bytes(upper)).hexdigest()

    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    outputs = []

    if args.route == "all":
        sols = {name: fn(y, lower, upper) for name, fn in _ROUTES.items()}
        sol = sols["recursive"]
        horizon = float(sol.x.times[-1]) + 1.0
        distances = {"x": {}, "k": {}}
        names = list(sols)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                key = f"{a}-{b}"
                distances["x"][key] = sup_norm_before(
                    combine(sols[a].x, sols[b].x, "sub"), horizon)
                distances["k"][key] = sup_norm_before(
                    combine(sols[a].k, sols[b].k, "sub"), horizon)
        _write_json(distances, out_dir, "route_distances.json")
        outputs.append("route_distances.json")
    else:
        sol = _ROUTES[args.route](y, lower, upper)

    for name, path in (("x.csv", sol.x), ("k.csv", sol.k),
                       ("phi1.csv", sol.phi1), ("phi2.csv", sol.phi2)):
        write_path_csv(path, os.path.join(out_dir, name))
        outputs.append(name)

    report = check_rp_conditions(sol, y, lower, upper, tol=args.tol)
    _write_json(_report_payload(report), out_dir, "report.json")
    outputs.append("report.json")

    _finish("reflect", digest, (), outputs, out_dir, started)
    if not report.ok:
        for entry in report.failures():
            print(f"condition failed: {entry.name} "
                  f"residual={format_float(entry.residual)}", file=sys.stderr)
        return EXIT_CONDITION_FAILURE
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve


def _solve_one_seed(doc, config_dir, seed, out_dir):
    prob, _ = build_problem(doc, config_dir, seed=seed)
    sol = solve(prob)
    outputs = []
    for name, path in ((f"X_{seed}.csv", sol.X), (f"K_{seed}.csv", sol.K)):
        write_path_csv(path, os.path.join(out_dir, name))
        outputs.append(name)
    taus_name = f"taus_{seed}.csv"
    with open(os.path.join(out_dir, taus_name), "w") as fh:
        fh.write("tau\n")
        for t in sol.tau_times:
            fh.write(format_float(t) + "\n")
    outputs.append(taus_name)

    lower, upper = prob.grid_barriers()
    violations = int(np.sum((sol.X.values < lower.values)
                            | (sol.X.values > upper.values)
                            | (sol.X.right_values < lower.right_values)
                            | (sol.X.right_values > upper.right_values)))
    identity = sol.report.entry("(vi) integral identity").residual

    diag_name = f"diagnostics_{seed}.json"
    payload = {
        "seed": seed,
        "m_used": sol.m_used,
        "iterations": list(sol.iterations),
        "contraction_ratios": list(sol.contraction_ratios),
        "tau_times": [format_float(t) for t in sol.tau_times],
        "containment_violations": violations,
        "report": _report_payload(sol.report),
    }
    outputs.append(diag_name)
    return payload, outputs, violations, identity, diag_name


def _cmd_solve(args) -> int:
    started = time.perf_counter()
    doc = load_config(args.config)
    digest = config_digest(doc)
    config_dir = os.path.dirname(os.path.abspath(args.config))
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)

    base_seed = args.seed if args.seed is not None \
        else int(doc.get("solver", {}).get("seed", 0))
    seeds = [base_seed + i for i in range(args.batch)] if args.batch else [base_seed]

    outputs = []
    failures = []
    total_violations = 0
    max_identity = 0.0

    def task(seed):
        try:
            return seed, _solve_one_seed(doc, config_dir, seed, out_dir)
        except ConvergenceError as exc:
            return seed, exc

    results = {}
    if len(seeds) > 1:
        workers = min(len(seeds), os.cpu_count() or 1)
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            for seed, outcome in pool.map(task, seeds):
                results[seed] = outcome
    else:
        seed, outcome = task(seeds[0])
        results[seed] = outcome

    for seed in seeds:  # deterministic order regardless of scheduling
        outcome = results[seed]
        if isinstance(outcome, ConvergenceError):
            print(f"error: seed {seed}: {outcome}", file=sys.stderr)
            failures.append(seed)
            continue
        payload, seed_outputs, violations, identity, diag_name = outcome
        _write_json(payload, out_dir, diag_name)
        outputs.extend(seed_outputs)
        total_violations += violations
        max_identity = max(max_identity, identity)

    if args.batch:
        summary = {
            "seeds": seeds,
            "failed_seeds": failures,
            "containment_violations": total_violations,
            "max_identity_residual": max_identity,
        }
        _write_json(summary, out_dir, "summary.json")
        outputs.append("summary.json")

    _finish("solve", digest, seeds, outputs, out_dir, started)
    if failures:
        print(f"error: solver failed for seed(s) {failures}", file=sys.stderr)
        return EXIT_SOLVER_FAILURE
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _cmd_verify(args) -> int:
    try:
        results = run_suite(args.suite, trials=args.trials, seed=args.seed,
                            tol=args.tol)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    payload = {"suites": [r.as_dict() for r in results],
               "ok": all(r.passed for r in results)}
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK if payload["ok"] else EXIT_SUITE_FAILURE


# ---------------------------------------------------------------------------
# simulate


def _cmd_simulate(args) -> int:
    started = time.perf_counter()
    doc = load_config(args.config, require_problem=False)
    digest = config_digest(doc)
    spec = build_driver_spec(doc)
    seed = args.seed if args.seed is not None \
        else int(doc.get("solver", {}).get("seed", 0))
    driver = simulate_driver(spec, seed)

    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    outputs = []
    for name, comp in (("mc.csv", driver.Mc), ("md.csv", driver.Md),
                       ("mg.csv", driver.Mg), ("vr.csv", driver.Vr),
                       ("vg.csv", driver.Vg)):
        write_path_csv(comp, os.path.join(out_dir, name))
        outputs.append(name)
    _finish("simulate", digest, (seed,), outputs, out_dir, started)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry points


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twobar",
        description="Two-barrier Skorokhod reflection and reflected SDEs.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reflect", help="reflect a path between two barriers")
    p.add_argument("y", help="input path CSV")
    p.add_argument("lower", help="lower barrier CSV")
    p.add_argument("upper", help="upper barrier CSV")
    p.add_argument("--route", choices=["explicit", "recursive", "composed", "all"],
                   default="recursive")
    p.add_argument("--tol", type=float, default=1e-9,
                   help="condition-check tolerance (default 1e-9)")
    p.add_argument("--out", default=_default_out(), help="output directory")
    p.set_defaults(fn=_cmd_reflect)

    p = sub.add_parser("solve", help="solve a reflected SDE from a problem file")
    p.add_argument("config", help="TOML problem file")
    p.add_argument("--seed", type=int, default=None,
                   help="driver seed (overrides the problem file)")
    p.add_argument("--batch", type=int, default=0, metavar="N",
                   help="run N consecutive seeds and write a summary")
    p.add_argument("--out-dir", default=_default_out(), help="output directory")
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser("verify", help="run a randomized invariant suite")
    p.add_argument("suite", help="routes | lipschitz | composition | crossing "
                                 "| bv | jumps | all")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=None,
                   help="override the suite's tolerance")
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("simulate", help="emit driver components for a config")
    p.add_argument("config", help="TOML file with a [driver] section")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=_default_out(), help="output directory")
    p.set_defaults(fn=_cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports its own errors
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (FormatError, ConfigError, GridError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    except ConvergenceError as exc:
        print(f"error: solver failed to converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER_FAILURE


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
