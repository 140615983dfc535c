"""Command-line pipeline: solve, certify, growth, transport, report.

certify chains every stage over one scenario and emits a single
consolidated JSON verdict placing the structural second-order block and
the empirical growth block side by side.  All output is deterministic for
a fixed config and seed: keys are sorted, no timestamps are recorded, and
every random draw is seeded from --seed.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .errors import ConfigError, NonConvergence, RadoncertError
from .growth import GrowthConfig, decay_slope, growth_report
from .measures import (DiscreteMeasure, Domain, load_measure,
                       measure_to_dict, save_measure)
from .model import Problem, load_scenario, objective
from .optimality import active_sets, check_first_order
from .second_order import check_C_conditions
from .solver import SolverConfig, solve_gcg
from .transport import bl_norm, w1

SCHEMA_VERSION = 1
DECAY_SLOPE_FAIL = 0.5   # min-ratio shrinking faster than radius^0.5
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3

STAGES = ("first_order", "active_sets", "second_order", "growth")


def _jsonable(obj):
    """Make a report tree json-dumpable and byte-stable."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _dump_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _ensure_out(path) -> str:
    os.makedirs(path, exist_ok=True)
    return str(path)


def _problem_summary(problem: Problem) -> dict:
    return {
        "alpha": problem.alpha,
        "domain": {"lower": list(problem.domain.lower),
                   "upper": list(problem.domain.upper)},
        "kernel": {"family": problem.kernel.family,
                   "n_components": problem.kernel.n_components},
        "loss": problem.loss.family,
    }


class _StageFailure(Exception):
    def __init__(self, stage, exc):
        self.stage = stage
        self.exc = exc
        super().__init__(f"stage {stage}: {exc}")


def _run(stage, fn):
    try:
        return fn()
    except Exception as exc:
        raise _StageFailure(stage, exc) from exc


def _write_growth_csv(path, report) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["bl_distance", "gap"])
        for bl, gap in report.csv_rows():
            wr.writerow([repr(bl), repr(gap)])


def _write_iterations_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["iter", "n_atoms", "objective", "max_abs_dual",
                     "inserted"])
        for r in rows:
            ins = "" if r["inserted"] is None else \
                ";".join(repr(c) for c in r["inserted"])
            wr.writerow([r["iter"], r["n_atoms"], repr(r["objective"]),
                         repr(r["max_abs_dual"]), ins])


def _obtain_measure(args, scenario, log_rows):
    if args.measure:
        return load_measure(args.measure, scenario.problem.domain)
    if scenario.measure is not None:
        return scenario.measure
    cfg = SolverConfig(grid_n=args.grid or 256,
                       ins_tol=args.tol if args.tol else 1e-7)
    return solve_gcg(scenario.problem, cfg, log=log_rows)


def _cmd_solve(args) -> int:
    scenario = load_scenario(args.config)
    rows: list = []
    cfg = SolverConfig(grid_n=args.grid or 256,
                       ins_tol=args.tol if args.tol else 1e-7)
    u = _run("solve", lambda: solve_gcg(scenario.problem, cfg, log=rows))
    out = _ensure_out(args.out)
    save_measure(f"{out}/measure.json", u)
    _write_iterations_csv(f"{out}/iterations.csv", rows)
    _dump_json(f"{out}/report.json", {
        "schema_version": SCHEMA_VERSION,
        "command": "solve",
        "seed": args.seed,
        "problem": _problem_summary(scenario.problem),
        "objective": objective(scenario.problem, u),
        "n_atoms": u.num_atoms,
        "iterations": len(rows),
        "measure": measure_to_dict(u),
        "verdicts": {"converged": True, "all_pass": True},
    })
    print(f"solve: {u.num_atoms} atoms, "
          f"objective {objective(scenario.problem, u):.12g}")
    return EXIT_PASS


def _certify_report(problem, u, args, want):
    """Run the pipeline through the requested stages, collect blocks."""
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "certify",
        "seed": args.seed,
        "problem": _problem_summary(problem),
        "measure": measure_to_dict(u),
    }
    verdicts: dict = {}
    grp = None

    fo = _run("first_order", lambda: check_first_order(
        problem, u, grid_n=args.grid or 128,
        tol=args.tol if args.tol else 1e-6))
    report["first_order"] = fo.to_dict()
    verdicts["first_order"] = fo.passed
    if "active_sets" in want:
        sets = _run("active_sets", lambda: active_sets(
            problem, u, grid_n=args.grid or 128))
        report["active_sets"] = sets.to_dict()
        if "second_order" in want:
            so = _run("second_order",
                      lambda: check_C_conditions(problem, u, sets))
            report["second_order"] = so.to_dict()
            verdicts["structural_b1"] = so.b1
        if "growth" in want:
            grp = _run("growth", lambda: growth_report(
                problem, u, sets, GrowthConfig(seed=args.seed)))
            slope = decay_slope(grp)
            b2 = bool(grp.verdict and slope < DECAY_SLOPE_FAIL)
            report["growth"] = grp.to_dict()
            report["growth"]["decay_slope"] = slope
            report["growth"]["empirical_b2"] = b2
            verdicts["empirical_b2"] = b2
    if "structural_b1" in verdicts and "empirical_b2" in verdicts:
        verdicts["agreement"] = \
            verdicts["structural_b1"] == verdicts["empirical_b2"]
    verdicts["all_pass"] = all(
        v for k, v in verdicts.items() if k != "agreement")
    report["verdicts"] = verdicts
    return report, grp


def _cmd_certify(args) -> int:
    scenario = load_scenario(args.config)
    problem = scenario.problem
    rows: list = []
    u = _run("solve", lambda: _obtain_measure(args, scenario, rows))
    want = STAGES if args.stage is None else STAGES[:STAGES.index(args.stage) + 1]
    report, grp = _certify_report(problem, u, args, want)
    out = _ensure_out(args.out)
    _dump_json(f"{out}/report.json", report)
    if rows:
        _write_iterations_csv(f"{out}/iterations.csv", rows)
    if grp is not None:
        _write_growth_csv(f"{out}/growth.csv", grp)
    for k, v in sorted(report["verdicts"].items()):
        print(f"certify: {k} = {v}")
    return EXIT_PASS if report["verdicts"]["all_pass"] else EXIT_FAIL


def _cmd_growth(args) -> int:
    scenario = load_scenario(args.config)
    problem = scenario.problem
    rows: list = []
    u = _run("solve", lambda: _obtain_measure(args, scenario, rows))
    sets = _run("active_sets", lambda: active_sets(
        problem, u, grid_n=args.grid or 128))
    grp = _run("growth", lambda: growth_report(
        problem, u, sets, GrowthConfig(seed=args.seed)))
    slope = decay_slope(grp)
    b2 = bool(grp.verdict and slope < DECAY_SLOPE_FAIL)
    out = _ensure_out(args.out)
    body = grp.to_dict()
    body["decay_slope"] = slope
    body["empirical_b2"] = b2
    _dump_json(f"{out}/report.json", {
        "schema_version": SCHEMA_VERSION,
        "command": "growth",
        "seed": args.seed,
        "problem": _problem_summary(problem),
        "measure": measure_to_dict(u),
        "growth": body,
        "verdicts": {"empirical_b2": b2, "all_pass": b2},
    })
    _write_growth_csv(f"{out}/growth.csv", grp)
    print(f"growth: gamma_hat = {grp.gamma_hat:.6g}, "
          f"decay_slope = {slope:.3g}, empirical_b2 = {b2}")
    return EXIT_PASS if b2 else EXIT_FAIL


def _padded_domain(dicts) -> Domain:
    pts = np.asarray([a["x"] for d in dicts for a in d["atoms"]], dtype=float)
    lo = pts.min(axis=0) - 1.0
    hi = pts.max(axis=0) + 1.0
    return Domain(tuple(lo), tuple(hi))


def _cmd_transport(args) -> int:
    with open(args.mu) as fh:
        dmu = json.load(fh)
    with open(args.nu) as fh:
        dnu = json.load(fh)
    if args.config:
        domain = load_scenario(args.config).problem.domain
    else:
        domain = _padded_domain([dmu, dnu])
    from .measures import measure_from_dict
    mu = measure_from_dict(domain, dmu)
    nu = measure_from_dict(domain, dnu)
    bl = bl_norm(mu - nu)
    body = {"bl": bl}
    try:
        value, plan = w1(mu, nu)
        body["w1"] = value
        body["plan"] = plan.to_dict()
    except RadoncertError as exc:
        # unbalanced or mixed-sign input: BL still stands on its own
        body["w1"] = None
        body["w1_error"] = str(exc)
    print(json.dumps(_jsonable(body), indent=2, sort_keys=True))
    return EXIT_PASS


def _cmd_report(args) -> int:
    with open(args.report) as fh:
        data = json.load(fh)
    print(f"schema_version: {data.get('schema_version')}")
    print(f"command: {data.get('command')}")
    for block in ("first_order", "second_order"):
        if block in data:
            print(f"[{block}]")
            for k, v in sorted(data[block].items()):
                print(f"  {k:24s} {v}")
    if "growth" in data:
        g = data["growth"]
        print("[growth]")
        for k in ("gamma_hat", "eps", "decay_slope", "empirical_b2",
                  "verdict", "n_samples"):
            if k in g:
                print(f"  {k:24s} {g[k]}")
    if "verdicts" in data:
        print("[verdicts]")
        for k, v in sorted(data["verdicts"].items()):
            print(f"  {k:24s} {v}")
    if "growth" in data and "samples" in data["growth"]:
        path = f"{_ensure_out(args.out)}/growth.csv"
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["bl_distance", "gap"])
            for s in data["growth"]["samples"]:
                wr.writerow([repr(s["bl_distance"]),
                             repr(s["objective_gap"])])
        print(f"wrote {path}")
    return EXIT_PASS


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="radoncert",
        description="certify stationary sparse measures: solve, first/secon"
                    "d-order checks, growth probing, transport distances")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="scenario file (JSON or TOML)")
        p.add_argument("--measure", help="measure JSON overriding the "
                       "scenario's (certify/growth skip the solve)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--grid", type=int, default=None,
                       help="grid resolution per axis for dual scans")
        p.add_argument("--tol", type=float, default=None,
                       help="stationarity tolerance")

    p = sub.add_parser("solve", help="run the conditional-gradient solver")
    common(p)
    p = sub.add_parser("certify", help="full pipeline with consolidated "
                       "verdict")
    common(p)
    p.add_argument("--stage", choices=STAGES, default=None,
                   help="stop after this stage")
    p = sub.add_parser("growth", help="growth probing only")
    common(p)
    p = sub.add_parser("transport", help="W1 and BL between two measures")
    p.add_argument("mu")
    p.add_argument("nu")
    p.add_argument("--config", help="scenario supplying the domain "
                   "(default: padded bounding box)")
    p = sub.add_parser("report", help="render a report.json")
    p.add_argument("report")
    p.add_argument("--out", default=".")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handler = {"solve": _cmd_solve, "certify": _cmd_certify,
               "growth": _cmd_growth, "transport": _cmd_transport,
               "report": _cmd_report}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _StageFailure as exc:
        if isinstance(exc.exc, ConfigError):
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(exc, file=sys.stderr)
        return EXIT_FAIL if isinstance(exc.exc, NonConvergence) \
            else EXIT_INTERNAL
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RadoncertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
