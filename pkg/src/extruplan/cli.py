"""Command-line entry point.

Exit codes: 0 success, 1 I/O, validation or infeasibility errors, 2 timeout.
Outputs are deterministic for a fixed seed unless ``--timing`` adds
wall-clock fields.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import benchmarks
from .export import FORMATS, export
from .frame import (FrameProblem, ProblemError, is_valid_sequence, load_problem, orient_sequence,
                    problem_from_json, save_problem)
from .heuristics import KINDS, InfeasibleError, make_heuristic, plan_stiffness
from .search import ALGORITHMS, SOLVED, TIMEOUT, plan, regression_stiffness_only
from .stiffness import StiffnessChecker, analyze
from .validate import dump_plan, load_plan, validate_plan

log = logging.getLogger("extruplan")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_TIMEOUT = 2

CSV_COLUMNS = ("problem", "algorithm", "heuristic", "trial", "success", "runtime", "backtracks", "plan_length")
SUITES = {"desk": benchmarks.desk_suite, "trap": benchmarks.trap_suite, "stiffness": benchmarks.stiffness_suite}
STIFFNESS_FORWARD = "plan_stiffness"
STIFFNESS_ALGORITHMS = (STIFFNESS_FORWARD, "regression")


@dataclass(frozen=True)
class RunConfig:
    algorithm: str = "regression"
    heuristic: str = "euclidean"
    seed: int = 0
    timeout: float = 60.0
    trans: float | None = None
    eps: float | None = None
    retraction: float | None = None
    smooth: bool = True
    timing: bool = False
    plan_out: Path | None = None
    stats_out: Path | None = None

    def apply_overrides(self, problem: FrameProblem) -> FrameProblem:
        changes = {k: v for k, v in (("trans", self.trans), ("eps", self.eps), ("retraction", self.retraction))
                   if v is not None}
        if not changes:
            return problem
        return problem.replace(tolerances=replace(problem.tolerances, **changes))


@dataclass
class TrialRow:
    problem: str
    algorithm: str
    heuristic: str
    trial: int
    success: bool
    runtime: float | None
    backtracks: int
    plan_length: int
    detail: dict = field(default_factory=dict)

    def csv_values(self) -> list:
        runtime = "" if self.runtime is None else f"{self.runtime:.3f}"
        return [self.problem, self.algorithm, self.heuristic, self.trial, str(self.success).lower(), runtime,
                self.backtracks, self.plan_length]


def _write(path, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _json(data) -> str:
    return json.dumps(data, indent=1, sort_keys=True) + "\n"


def _trial_rng(seed: int, trial: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed, trial])


def run_plan(problem: FrameProblem, config: RunConfig, trial: int = 0):
    """Heuristic construction plus search; the heuristic's cost counts against the timeout."""
    rng = _trial_rng(config.seed, trial)
    start = time.monotonic()
    stiff = StiffnessChecker(problem)
    heuristic = make_heuristic(problem, config.heuristic, rng, stiff, timeout=config.timeout)
    remaining = max(0.0, config.timeout - (time.monotonic() - start))
    return plan(problem, config.algorithm, heuristic, rng, timeout=remaining, smooth=config.smooth, stiff=stiff)


def cmd_plan(args) -> int:
    config = RunConfig(algorithm=args.algorithm, heuristic=args.heuristic, seed=args.seed, timeout=args.timeout,
                       trans=args.trans, eps=args.eps, retraction=args.retraction, smooth=not args.no_smooth,
                       timing=args.timing, plan_out=args.out, stats_out=args.stats)
    problem = config.apply_overrides(load_problem(args.problem))
    try:
        result = run_plan(problem, config)
        status, stats = result.status, result.stats.to_json(config.timing)
    except TimeoutError:
        result, status, stats = None, TIMEOUT, {}
    except InfeasibleError as exc:
        log.error("%s", exc)
        return EXIT_ERROR
    report = {"problem": problem.name, "algorithm": config.algorithm, "heuristic": config.heuristic,
              "seed": config.seed, "status": status, "stats": stats}
    if status == SOLVED:
        verdict = validate_plan(problem, result.plan)
        if not verdict.valid:
            report["status"] = "invalid"
            report["verdict"] = verdict.to_json()
            _write(config.stats_out or "-", _json(report))
            log.error("planner produced an invalid plan; nothing written")
            return EXIT_ERROR
        _write(config.plan_out or "-", dump_plan(result.plan))
    if config.stats_out is not None or status != SOLVED:
        _write(config.stats_out or "-", _json(report))
    if status == SOLVED:
        return EXIT_OK
    return EXIT_TIMEOUT if status == TIMEOUT else EXIT_ERROR


def cmd_validate(args) -> int:
    problem = load_problem(args.problem)
    verdict = validate_plan(problem, load_plan(args.plan))
    _write(args.out, _json(verdict.to_json()))
    return EXIT_OK if verdict.valid else EXIT_ERROR


def _parse_elements(text: str | None, problem: FrameProblem) -> list[int]:
    if text is None:
        return list(range(problem.num_elements))
    return [int(v) for v in text.replace(",", " ").split()]


def cmd_check_stiffness(args) -> int:
    problem = load_problem(args.problem)
    if args.plan is not None:
        elements = [d.element for d in load_plan(args.plan).sequence]
    else:
        elements = _parse_elements(args.elements, problem)
    if any(not 0 <= e < problem.num_elements for e in elements):
        log.error("element ids must lie in [0, %d)", problem.num_elements)
        return EXIT_ERROR
    report = analyze(problem, elements)
    _write(args.out, _json(report.to_json()))
    return EXIT_OK if report.passed else EXIT_ERROR


def cmd_sequence(args) -> int:
    problem = load_problem(args.problem)
    heuristic = make_heuristic(problem, args.heuristic, _trial_rng(args.seed))
    try:
        order = plan_stiffness(problem, heuristic=heuristic, timeout=args.timeout)
    except TimeoutError:
        log.error("no sequence within %.3g s", args.timeout)
        return EXIT_TIMEOUT
    if order is None:
        log.error("no stiffness-feasible sequence exists")
        return EXIT_ERROR
    directed = orient_sequence(problem, order)
    _write(args.out, _json({"sequence": [list(d) for d in directed]}))
    return EXIT_OK


def cmd_export(args) -> int:
    problem = load_problem(args.problem)
    plan_ = load_plan(args.plan)
    verdict = validate_plan(problem, plan_)
    if not verdict.valid:
        log.error("plan does not validate against the problem: %s", sorted(verdict.clauses))
        return EXIT_ERROR
    sequence = plan_.sequence
    if args.prefix is not None:
        sequence = sequence[:args.prefix]
    try:
        export(problem, sequence, args.out, args.format)
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_ERROR
    return EXIT_OK


def cmd_generate(args) -> int:
    out = Path(args.out)
    if args.suite is not None:
        generated = SUITES[args.suite]()
    else:
        generated = [benchmarks.generate(args.family, args.size)]
    if len(generated) > 1 or out.is_dir() or not out.suffix:
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"{g.problem.name}.json" for g in generated]
    else:
        paths = [out]
    for g, path in zip(generated, paths):
        save_problem(g.problem, path)
        if args.witness:
            path.with_suffix(".witness.json").write_text(_json({"sequence": [list(d) for d in g.witness]}))
        log.info("wrote %s (%d elements)", path, g.problem.num_elements)
    return EXIT_OK


# -- benchmarking ---------------------------------------------------------------

def _bench_trial(job: tuple) -> TrialRow:
    """One isolated trial: own problem copy, rng and caches."""
    data, algorithm, heuristic, trial, seed, timeout, smooth, timing, stiffness_only = job
    problem = problem_from_json(data)
    start = time.monotonic()
    try:
        if stiffness_only:
            row = _stiffness_trial(problem, algorithm, heuristic, trial, seed, timeout)
        else:
            row = _planning_trial(problem, algorithm, heuristic, trial, seed, timeout, smooth)
    except Exception as exc:  # per-trial failures never abort the suite
        row = TrialRow(problem.name, algorithm, heuristic, trial, False, None, 0, 0,
                       {"error": f"{type(exc).__name__}: {exc}"})
    row.runtime = time.monotonic() - start if timing else None
    return row


def _planning_trial(problem, algorithm, heuristic, trial, seed, timeout, smooth) -> TrialRow:
    config = RunConfig(algorithm=algorithm, heuristic=heuristic, seed=seed, timeout=timeout, smooth=smooth)
    try:
        result = run_plan(problem, config, trial)
    except TimeoutError:
        return TrialRow(problem.name, algorithm, heuristic, trial, False, None, 0, 0, {"status": TIMEOUT})
    success = result.status == SOLVED and validate_plan(problem, result.plan).valid
    length = len(result.plan.trajectories) if result.plan is not None else 0
    return TrialRow(problem.name, algorithm, heuristic, trial, success, None, result.stats.backtracks, length,
                    {"status": result.status})


def _stiffness_trial(problem, algorithm, heuristic, trial, seed, timeout) -> TrialRow:
    rng = _trial_rng(seed, trial)
    stiff = StiffnessChecker(problem)
    table = make_heuristic(problem, heuristic, rng, stiff, timeout=timeout)
    backtracks = 0
    if algorithm == STIFFNESS_FORWARD:
        try:
            order = plan_stiffness(problem, stiff, table, timeout=timeout)
        except TimeoutError:
            order = None
    else:
        result = regression_stiffness_only(problem, table, timeout=timeout, stiff=stiff)
        order, backtracks = result.order, result.backtracks
    success = order is not None and bool(is_valid_sequence(problem, orient_sequence(problem, order), stiff))
    return TrialRow(problem.name, algorithm, heuristic, trial, success, None, backtracks,
                    len(order) if order else 0)


def bench_rows(problems: list[FrameProblem], algorithms, heuristics, trials: int, seed: int, timeout: float,
               smooth: bool = True, timing: bool = False, stiffness_only: bool = False,
               workers: int | None = None) -> list[TrialRow]:
    jobs = [(p.to_json(), a, h, t, seed, timeout, smooth, timing, stiffness_only)
            for p in problems for a in algorithms for h in heuristics for t in range(trials)]
    workers = workers or int(os.environ.get("EXTRUPLAN_THREADS", "1") or 1)
    if workers <= 1:
        rows = [_bench_trial(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_bench_trial, jobs))
    return sorted(rows, key=lambda r: (r.problem, r.algorithm, r.heuristic, r.trial))


def rows_to_csv(rows: list[TrialRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.csv_values())
    return buffer.getvalue()


def read_csv(text: str) -> list[dict]:
    """Parse bench CSV back into typed rows."""
    out = []
    for record in csv.DictReader(io.StringIO(text)):
        out.append({
            "problem": record["problem"],
            "algorithm": record["algorithm"],
            "heuristic": record["heuristic"],
            "trial": int(record["trial"]),
            "success": record["success"] == "true",
            "runtime": float(record["runtime"]) if record["runtime"] else None,
            "backtracks": int(record["backtracks"]),
            "plan_length": int(record["plan_length"]),
        })
    return out


def summarize(rows: list[TrialRow]) -> str:
    groups: dict = {}
    for row in rows:
        groups.setdefault((row.algorithm, row.heuristic), []).append(row)
    lines = []
    for (algorithm, heuristic), group in sorted(groups.items()):
        solved = [r for r in group if r.success]
        line = f"{algorithm:>15} {heuristic:>10}  success {len(solved)}/{len(group)} ({100.0 * len(solved) / len(group):.0f}%)"
        times = [r.runtime for r in solved if r.runtime is not None]
        if times:
            line += f"  mean runtime {sum(times) / len(times):.2f} s"
        lines.append(line)
    return "\n".join(lines) + "\n"


def cmd_bench(args) -> int:
    if args.problems:
        problems = [load_problem(p) for p in args.problems]
    else:
        problems = [g.problem for g in SUITES[args.suite or ("stiffness" if args.stiffness_only else "desk")]()]
    if args.stiffness_only:
        algorithms = args.algorithms or list(STIFFNESS_ALGORITHMS)
        unknown = set(algorithms) - set(STIFFNESS_ALGORITHMS)
    else:
        algorithms = args.algorithms or ["regression"]
        unknown = set(algorithms) - set(ALGORITHMS)
    if unknown:
        log.error("unknown algorithm(s): %s", ", ".join(sorted(unknown)))
        return EXIT_ERROR
    rows = bench_rows(problems, algorithms, args.heuristics or ["euclidean"], args.trials, args.seed,
                      args.timeout, smooth=not args.no_smooth, timing=args.timing,
                      stiffness_only=args.stiffness_only, workers=args.workers)
    _write(args.out, rows_to_csv(rows))
    sys.stderr.write(summarize(rows))
    return EXIT_OK


# -- argument parsing -----------------------------------------------------------

def _add_tolerances(parser) -> None:
    parser.add_argument("--trans", type=float, help="override the translational stiffness tolerance (m)")
    parser.add_argument("--eps", type=float, help="override the extrusion path tolerance (m)")
    parser.add_argument("--retraction", type=float, help="override the retraction distance (m)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="extruplan", description="Sequence and motion planning for frame extrusion.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan a full extrusion")
    p.add_argument("problem", type=Path)
    p.add_argument("--algorithm", choices=ALGORITHMS, default="regression")
    p.add_argument("--heuristic", choices=KINDS, default="euclidean")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--no-smooth", action="store_true", help="skip transit shortcutting")
    p.add_argument("--timing", action="store_true", help="include wall-clock time in stats")
    p.add_argument("--out", type=Path, help="plan JSON path (default stdout)")
    p.add_argument("--stats", type=Path, help="stats JSON path")
    _add_tolerances(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("validate", help="check a plan against a problem")
    p.add_argument("problem", type=Path)
    p.add_argument("plan", type=Path)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("check-stiffness", help="deformation report for a partial structure")
    p.add_argument("problem", type=Path)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--elements", help="comma-separated element ids (default: all)")
    group.add_argument("--plan", type=Path, help="use every element extruded by this plan")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_check_stiffness)

    p = sub.add_parser("sequence", help="stiffness-only element order")
    p.add_argument("problem", type=Path)
    p.add_argument("--heuristic", choices=tuple(h for h in KINDS if h != "stiffplan"), default="euclidean")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_sequence)

    p = sub.add_parser("bench", help="run a benchmark suite and write CSV")
    p.add_argument("problems", nargs="*", type=Path, help="problem files (default: a generated suite)")
    p.add_argument("--suite", choices=sorted(SUITES))
    p.add_argument("--algorithms", nargs="+")
    p.add_argument("--heuristics", nargs="+", choices=KINDS)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--stiffness-only", action="store_true",
                   help=f"ignore geometry; algorithms {' and '.join(STIFFNESS_ALGORITHMS)}")
    p.add_argument("--no-smooth", action="store_true")
    p.add_argument("--timing", action="store_true", help="fill the runtime column")
    p.add_argument("--workers", type=int, help="worker processes (default: EXTRUPLAN_THREADS or 1)")
    p.add_argument("--out", type=Path, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("export", help="write colored capsule geometry for a plan")
    p.add_argument("problem", type=Path)
    p.add_argument("plan", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--format", choices=FORMATS, help="default: from the output suffix")
    p.add_argument("--prefix", type=int, help="color only the first N extrusions; the rest stay black")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("generate", help="write synthetic benchmark problems")
    what = p.add_mutually_exclusive_group(required=True)
    what.add_argument("--family", choices=benchmarks.FAMILIES)
    what.add_argument("--suite", choices=sorted(SUITES))
    p.add_argument("--size", type=int, default=3)
    p.add_argument("--witness", action="store_true", help="also write the known-feasible order")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ProblemError, KeyError, TypeError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
