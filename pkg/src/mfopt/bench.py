"""Experiment orchestration: test-case definitions, seeded repetition,
result persistence, and report generation.

One JSON record is persisted per (test case, solver, seed); re-running an
experiment skips every record that already exists, so interrupted
experiments resume for free and completed ones are no-ops. All summary
artifacts are derived purely from the persisted records and can be
regenerated offline with ``report``.

Also the command-line entry point (``mfopt``), with subcommands ``run``,
``report``, ``transfer``, ``complementarity`` and ``list-cases``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import (ComparisonOutcome, aggregate_transfer,
                       best_solution_overlap, compare_task_costs,
                       pair_intensities)
from .core import MultitaskProblem
from .mfcga import EngineConfig, Mfcga
from .mfea import Mfea, MfeaConfig
from .results import RunResults, TaskResult
from .tsplib import (TspInstance, bundled_instances_dir, load_instance,
                     load_opt_tour, overlap_stats, tour_length)

__all__ = ["TestCase", "ExperimentConfig", "RunResults", "TaskResult",
           "builtin_test_cases", "case_by_id", "run_experiment",
           "load_results", "report", "main", "SOLVERS"]

SOLVERS = ("mfcga", "mfea")


@dataclass(frozen=True)
class TestCase:
    """A named multitask bundle; task order is part of the definition."""

    id: str
    task_names: tuple[str, ...]


def builtin_test_cases() -> list[TestCase]:
    """The 15 standard multitask bundles over the 8 bundled instances."""
    def tc(cid, *names):
        return TestCase(cid, tuple(names))

    return [
        tc("TC_4_1", "kroA100", "kroA150", "kroA200", "kroC100"),
        tc("TC_4_2", "kroB100", "kroB150", "kroD100", "kroE100"),
        tc("TC_4_3", "kroA100", "kroA150", "kroD100", "kroE100"),
        tc("TC_4_4", "kroA200", "kroC100", "kroB100", "kroB150"),
        tc("TC_4_5", "kroA100", "kroA200", "kroB100", "kroD100"),
        tc("TC_4_6", "kroA150", "kroC100", "kroB150", "kroE100"),
        tc("TC_4_7", "kroA100", "kroA150", "kroB100", "kroB150"),
        tc("TC_4_8", "kroA200", "kroC100", "kroD100", "kroE100"),
        tc("TC_4_9", "kroA100", "kroC100", "kroB100", "kroD100"),
        tc("TC_4_10", "kroA150", "kroA200", "kroB150", "kroE100"),
        tc("TC_6_1", "kroA100", "kroA150", "kroA200", "kroB100", "kroC100",
           "kroB150"),
        tc("TC_6_2", "kroA200", "kroB100", "kroC100", "kroB150", "kroD100",
           "kroE100"),
        tc("TC_6_3", "kroA100", "kroA150", "kroA200", "kroB150", "kroD100",
           "kroE100"),
        tc("TC_6_4", "kroA100", "kroA150", "kroB100", "kroC100", "kroD100",
           "kroE100"),
        tc("TC_8", "kroA100", "kroA150", "kroA200", "kroB100", "kroC100",
           "kroB150", "kroD100", "kroE100"),
    ]


def case_by_id(case_id: str) -> TestCase:
    for case in builtin_test_cases():
        if case.id == case_id:
            return case
    raise KeyError(f"unknown test case {case_id!r}")


@dataclass
class ExperimentConfig:
    """What to run and where to put it.

    The seed of repetition r is ``base_seed + r``, which makes every
    repetition independently re-runnable.
    """

    cases: tuple[str, ...]
    solvers: tuple[str, ...] = SOLVERS
    repetitions: int = 20
    evaluation_budget: int = 500_000
    base_seed: int = 1
    instances_dir: Path = field(default_factory=bundled_instances_dir)
    output_dir: Path = Path("results")
    population_size: int = 200

    def __post_init__(self) -> None:
        self.cases = tuple(self.cases)
        self.solvers = tuple(self.solvers)
        self.instances_dir = Path(self.instances_dir)
        self.output_dir = Path(self.output_dir)
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        unknown = set(self.solvers) - set(SOLVERS)
        if unknown:
            raise ValueError(f"unknown solvers: {sorted(unknown)}")
        for cid in self.cases:
            case_by_id(cid)


def _record_path(out_dir: Path, case_id: str, solver: str, seed: int) -> Path:
    return out_dir / "runs" / f"{case_id}__{solver}__s{seed}.json"


def _load_case_problem(case: TestCase, instances_dir: Path,
                       cache: dict[str, TspInstance]) -> MultitaskProblem:
    tasks = []
    for name in case.task_names:
        if name not in cache:
            path = instances_dir / f"{name}.tsp"
            if not path.is_file():
                raise FileNotFoundError(f"instance file missing: {path}")
            cache[name] = load_instance(path)
        tasks.append(cache[name])
    return MultitaskProblem(tuple(tasks))


def _build_solver(solver: str, problem: MultitaskProblem,
                  config: ExperimentConfig, seed: int):
    if solver == "mfcga":
        return Mfcga(problem, EngineConfig(
            seed=seed, population_size=config.population_size,
            evaluation_budget=config.evaluation_budget))
    if solver == "mfea":
        return Mfea(problem, MfeaConfig(
            seed=seed, population_size=config.population_size,
            evaluation_budget=config.evaluation_budget))
    raise ValueError(f"unknown solver {solver!r}")


def run_experiment(config: ExperimentConfig, *, echo=print) -> list[RunResults]:
    """Execute every (case, solver, repetition) and persist one record each.

    Records already present under ``output_dir/runs`` (matched by case,
    solver and seed) are loaded instead of re-run. Instance files are checked
    before any run starts. Returns all records covered by ``config``, and
    rewrites the summary artifacts from them.
    """
    cache: dict[str, TspInstance] = {}
    problems = {}
    for cid in config.cases:  # fail fast on missing instances
        problems[cid] = _load_case_problem(case_by_id(cid),
                                           config.instances_dir, cache)

    runs_dir = config.output_dir / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    timings_path = config.output_dir / "timings.csv"

    records: list[RunResults] = []
    for cid in config.cases:
        for solver in config.solvers:
            for rep in range(config.repetitions):
                seed = config.base_seed + rep
                path = _record_path(config.output_dir, cid, solver, seed)
                if path.is_file():
                    records.append(RunResults.from_json(path.read_text()))
                    continue
                engine = _build_solver(solver, problems[cid], config, seed)
                result = engine.run(case_id=cid)
                result.metadata.update({
                    "base_seed": config.base_seed,
                    "repetition": rep,
                })
                path.write_text(result.to_json())
                with timings_path.open("a") as fh:
                    fh.write(f"{cid},{solver},{seed},{result.wall_time_s:.3f}\n")
                echo(f"ran {cid} {solver} seed={seed} "
                     f"[{result.wall_time_s:.1f}s]")
                records.append(result)

    write_reports(config.output_dir, records, instances_dir=config.instances_dir)
    return records


def load_results(results_dir: Path) -> tuple[list[RunResults], list[str]]:
    """Read every persisted record; corrupt files are skipped with a warning."""
    results_dir = Path(results_dir)
    records, warnings = [], []
    runs_dir = results_dir / "runs"
    if not runs_dir.is_dir():
        return records, warnings
    for path in sorted(runs_dir.glob("*.json")):
        try:
            records.append(RunResults.from_json(path.read_text()))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            warnings.append(f"skipped corrupt record {path.name}: {exc}")
    return records, warnings


# -- report generation -----------------------------------------------------


def _fmt(x: float, nd: int = 4) -> str:
    return f"{x:.{nd}f}"


def _costs_by_case_instance(records: list[RunResults]):
    """{(case, instance): {solver: [cost per run, ordered by seed]}}"""
    out: dict[tuple[str, str], dict[str, list[tuple[int, int]]]] = {}
    for rec in records:
        for task in rec.tasks:
            slot = out.setdefault((rec.test_case, task.instance), {})
            slot.setdefault(rec.solver, []).append((rec.seed, task.best_cost))
    final = {}
    for key, per_solver in out.items():
        final[key] = {s: [c for _, c in sorted(v)] for s, v in per_solver.items()}
    return final


def _case_order(records: list[RunResults]) -> list[str]:
    known = [c.id for c in builtin_test_cases()]
    present = {r.test_case for r in records}
    ordered = [c for c in known if c in present]
    ordered += sorted(present - set(known))
    return ordered


def _slot_order(case_id: str, records: list[RunResults]) -> list[str]:
    try:
        return list(case_by_id(case_id).task_names)
    except KeyError:
        for rec in records:
            if rec.test_case == case_id:
                return [t.instance for t in rec.tasks]
        return []


def write_reports(out_dir: Path, records: list[RunResults],
                  instances_dir: Path | None = None,
                  warnings: list[str] | None = None) -> dict[str, Path]:
    """Regenerate every summary artifact from run records. Returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    warnings = list(warnings or [])
    costs = _costs_by_case_instance(records)
    cases = _case_order(records)
    paths: dict[str, Path] = {}

    # (a) per-instance summary statistics
    p = out_dir / "summary.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case", "instance", "solver", "runs", "mean", "best", "std"])
        for cid in cases:
            for inst in _slot_order(cid, records):
                for solver in SOLVERS:
                    sample = costs.get((cid, inst), {}).get(solver)
                    if not sample:
                        continue
                    arr = np.asarray(sample, dtype=np.float64)
                    w.writerow([cid, inst, solver, arr.size,
                                _fmt(arr.mean()), int(arr.min()),
                                _fmt(arr.std(ddof=0))])
    paths["summary"] = p

    # (b) win/loss per instance slot (mean-of-means comparison)
    p = out_dir / "wins.csv"
    win_rows = []
    with p.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case", "instance", "mfcga_mean", "mfea_mean", "winner"])
        for cid in cases:
            for inst in _slot_order(cid, records):
                per_solver = costs.get((cid, inst), {})
                if not all(s in per_solver for s in SOLVERS):
                    continue
                m_cga = float(np.mean(per_solver["mfcga"]))
                m_ea = float(np.mean(per_solver["mfea"]))
                winner = "mfcga" if m_cga < m_ea else "mfea"
                w.writerow([cid, inst, _fmt(m_cga), _fmt(m_ea), winner])
                win_rows.append((cid, inst, winner))
    paths["wins"] = p

    # (c) Wilcoxon rank-sum per instance slot (mfcga vs mfea, one-sided)
    p = out_dir / "wilcoxon.csv"
    comparisons: list[tuple[str, ComparisonOutcome]] = []
    with p.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case", "instance", "z", "p", "significant"])
        for cid in cases:
            for inst in _slot_order(cid, records):
                per_solver = costs.get((cid, inst), {})
                if not all(len(per_solver.get(s, [])) >= 2 for s in SOLVERS):
                    continue
                cmp = compare_task_costs(inst, per_solver["mfcga"],
                                         per_solver["mfea"])
                comparisons.append((cid, cmp))
                w.writerow([cid, inst, f"{cmp.z:.6f}", f"{cmp.p:.6f}",
                            int(cmp.significant)])
    paths["wilcoxon"] = p

    # (d) averaged transfer matrices per case and solver
    for cid in cases:
        slots = _slot_order(cid, records)
        for solver in SOLVERS:
            ledgers = [r.transfer for r in records
                       if r.test_case == cid and r.solver == solver]
            if not ledgers:
                continue
            mean = aggregate_transfer(ledgers)
            p = out_dir / f"transfer_{cid}_{solver}.csv"
            with p.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["src\\dst"] + slots)
                for i, name in enumerate(slots):
                    w.writerow([name] + [_fmt(mean[i, j]) for j in range(len(slots))])
            paths[f"transfer_{cid}_{solver}"] = p

    # (e) complementarity matrices over the instances involved
    if instances_dir is not None:
        names = sorted({t.instance for r in records for t in r.tasks})
        insts = {}
        for name in names:
            path = Path(instances_dir) / f"{name}.tsp"
            if path.is_file():
                insts[name] = load_instance(path)
        if len(insts) >= 2:
            paths.update(_write_complementarity(
                out_dir, insts, _best_tours_from_records(records, insts)))

    # text rollup
    p = out_dir / "report.txt"
    p.write_text(_text_report(records, costs, cases, win_rows, comparisons,
                              warnings))
    paths["report"] = p
    return paths


def _best_tours_from_records(records: list[RunResults],
                             insts: dict[str, TspInstance]) -> dict[str, np.ndarray]:
    """Best tour seen per instance across all runs, plus bundled optima."""
    best: dict[str, tuple[int, np.ndarray]] = {}
    for rec in records:
        for task in rec.tasks:
            if task.instance not in insts:
                continue
            cur = best.get(task.instance)
            if cur is None or task.best_cost < cur[0]:
                best[task.instance] = (task.best_cost,
                                       np.asarray(task.best_tour, dtype=np.int64))
    for name, inst in insts.items():
        opt_path = bundled_instances_dir() / f"{name}.opt.tour"
        if opt_path.is_file():
            tour = load_opt_tour(opt_path)
            if tour.size == inst.dimension:
                cost = tour_length(inst, tour)
                if name not in best or cost < best[name][0]:
                    best[name] = (cost, tour)
    return {name: tour for name, (_, tour) in best.items()}


def _write_complementarity(out_dir: Path, insts: dict[str, TspInstance],
                           best_tours: dict[str, np.ndarray]) -> dict[str, Path]:
    names = sorted(insts)
    paths = {}

    p = out_dir / "complementarity_nodes.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["a", "b", "shared_nodes", "pct_mean_dim", "pct_min_dim"])
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                st = overlap_stats(insts[a], insts[b])
                w.writerow([a, b, st["shared"], _fmt(st["pct_mean_dim"], 2),
                            _fmt(st["pct_min_dim"], 2)])
    paths["complementarity_nodes"] = p

    p = out_dir / "complementarity_matrix.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["instance"] + names)
        for a in names:
            row = [a]
            for b in names:
                if a == b:
                    row.append("")
                else:
                    row.append(_fmt(200.0 * overlap_stats(insts[a], insts[b])["shared"]
                                    / (insts[a].dimension + insts[b].dimension), 2))
            w.writerow(row)
    paths["complementarity_matrix"] = p

    covered = [n for n in names if n in best_tours]
    if len(covered) >= 2:
        p = out_dir / "complementarity_best_tours.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["a", "b", "pct_common_edges"])
            for i, a in enumerate(covered):
                for b in covered[i + 1:]:
                    val = best_solution_overlap(insts[a], best_tours[a],
                                                insts[b], best_tours[b])
                    w.writerow([a, b, _fmt(val, 2)])
        paths["complementarity_best_tours"] = p
    return paths


def _text_report(records, costs, cases, win_rows, comparisons, warnings) -> str:
    buf = io.StringIO()
    total_runs = len(records)
    print("multitask benchmark report", file=buf)
    print(f"runs: {total_runs}", file=buf)
    if total_runs == 0:
        print("no run records found; nothing to report", file=buf)
        return buf.getvalue()

    print("", file=buf)
    print("per-case winners (by mean best cost, slot order as defined):",
          file=buf)
    wins_by_case: dict[str, list[str]] = {}
    for cid, inst, winner in win_rows:
        wins_by_case.setdefault(cid, []).append(winner)
    n_slots = sum(len(v) for v in wins_by_case.values())
    n_cga = sum(v.count("mfcga") for v in wins_by_case.values())
    for cid in cases:
        if cid in wins_by_case:
            marks = " ".join(w.upper() for w in wins_by_case[cid])
            print(f"  {cid:<9s} {marks}", file=buf)
    if n_slots:
        print(f"  mfcga wins {n_cga}/{n_slots} instance slots", file=buf)

    print("", file=buf)
    print("per-instance statistics (mean / best / std):", file=buf)
    for cid in cases:
        for inst in _slot_order(cid, records):
            per_solver = costs.get((cid, inst), {})
            for solver in SOLVERS:
                sample = per_solver.get(solver)
                if not sample:
                    continue
                arr = np.asarray(sample, dtype=np.float64)
                print(f"  {cid:<9s} {inst:<9s} {solver:<6s} "
                      f"{arr.mean():>10.1f} {int(arr.min()):>8d} "
                      f"{arr.std(ddof=0):>8.2f}", file=buf)

    if comparisons:
        print("", file=buf)
        print("Wilcoxon rank-sum, one-sided (mfcga better), 95% level "
              "(z < -1.64):", file=buf)
        zs = []
        for cid, cmp in comparisons:
            mark = "significant" if cmp.significant else "-"
            print(f"  {cid:<9s} {cmp.instance:<9s} z={cmp.z:+.3f} "
                  f"p={cmp.p:.5f} {mark}", file=buf)
            zs.append(cmp.z)
        print(f"  mean z = {np.mean(zs):+.3f}, mean p = "
              f"{np.mean([c.p for _, c in comparisons]):.5f}", file=buf)

    print("", file=buf)
    print("notes:", file=buf)
    print("  - node overlap percentages use the mean-dimension (Dice) "
          "normalisation; the min-dimension variant is reported alongside "
          "in complementarity_nodes.csv", file=buf)
    print("  - best-tour complementarity uses undirected edge agreement on "
          "the shared-node-induced cyclic subsequences", file=buf)
    for wmsg in warnings:
        print(f"  - {wmsg}", file=buf)
    return buf.getvalue()


def report(results_dir: Path, out_dir: Path | None = None,
           instances_dir: Path | None = None) -> dict[str, Path]:
    """Regenerate all summary artifacts from persisted records alone."""
    results_dir = Path(results_dir)
    records, warnings = load_results(results_dir)
    return write_reports(out_dir or results_dir, records,
                         instances_dir=instances_dir or bundled_instances_dir(),
                         warnings=warnings)


# -- command-line interface --------------------------------------------------


def _split_list(value: str) -> list[str]:
    return [v for v in value.replace(",", " ").split() if v]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mfopt",
        description="Multitask TSP benchmark: MFCGA vs MFEA with transfer "
                    "and significance analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute seeded benchmark runs")
    p_run.add_argument("--cases", default="all",
                       help="comma-separated test-case ids, or 'all'")
    p_run.add_argument("--solvers", default="mfcga,mfea",
                       help="comma-separated subset of: mfcga, mfea")
    p_run.add_argument("--reps", type=int, default=20)
    p_run.add_argument("--budget", type=int, default=500_000)
    p_run.add_argument("--seed", type=int, default=1, help="base seed; "
                       "repetition r uses base+r")
    p_run.add_argument("--instances-dir", type=Path,
                       default=bundled_instances_dir())
    p_run.add_argument("--out", type=Path, default=Path("results"))

    p_rep = sub.add_parser("report", help="regenerate reports from records")
    p_rep.add_argument("--in", dest="results_dir", type=Path, required=True)
    p_rep.add_argument("--format", choices=("csv", "text"), default="text")

    p_tr = sub.add_parser("transfer", help="print a case's averaged "
                          "transfer matrix")
    p_tr.add_argument("--in", dest="results_dir", type=Path, required=True)
    p_tr.add_argument("--case", required=True)
    p_tr.add_argument("--solver", choices=SOLVERS, default="mfcga")

    p_co = sub.add_parser("complementarity", help="instance and best-tour "
                          "overlap matrices")
    p_co.add_argument("--instances-dir", type=Path,
                      default=bundled_instances_dir())
    p_co.add_argument("--best-tours-dir", type=Path, default=None)

    sub.add_parser("list-cases", help="print the built-in test cases")

    args = parser.parse_args(argv)

    if args.command == "list-cases":
        for case in builtin_test_cases():
            print(f"{case.id}: {', '.join(case.task_names)}")
        return 0

    if args.command == "run":
        case_ids = ([c.id for c in builtin_test_cases()]
                    if args.cases.strip() == "all" else _split_list(args.cases))
        config = ExperimentConfig(
            cases=tuple(case_ids),
            solvers=tuple(_split_list(args.solvers)),
            repetitions=args.reps,
            evaluation_budget=args.budget,
            base_seed=args.seed,
            instances_dir=args.instances_dir,
            output_dir=args.out,
        )
        run_experiment(config)
        print(f"records and reports under {config.output_dir}")
        return 0

    if args.command == "report":
        paths = report(args.results_dir)
        if args.format == "text":
            print((args.results_dir / "report.txt").read_text(), end="")
        else:
            print((args.results_dir / "summary.csv").read_text(), end="")
        return 0

    if args.command == "transfer":
        records, _ = load_results(args.results_dir)
        ledgers = [r.transfer for r in records
                   if r.test_case == args.case and r.solver == args.solver]
        if not ledgers:
            print(f"no {args.solver} records for {args.case} under "
                  f"{args.results_dir}", file=sys.stderr)
            return 1
        mean = aggregate_transfer(ledgers)
        slots = _slot_order(args.case, records)
        w = csv.writer(sys.stdout)
        w.writerow(["src\\dst"] + slots)
        for i, name in enumerate(slots):
            w.writerow([name] + [_fmt(mean[i, j]) for j in range(len(slots))])
        print("", file=sys.stdout)
        print("strongest inter-task pairs (both directions summed):")
        for (i, j), val in pair_intensities(mean)[:5]:
            print(f"  {slots[i - 1]} <-> {slots[j - 1]}: {val:.2f}")
        return 0

    if args.command == "complementarity":
        inst_dir = Path(args.instances_dir)
        insts = {p.stem: load_instance(p) for p in sorted(inst_dir.glob("*.tsp"))}
        if len(insts) < 2:
            print(f"need at least two .tsp files in {inst_dir}", file=sys.stderr)
            return 1
        names = sorted(insts)
        w = csv.writer(sys.stdout)
        w.writerow(["a", "b", "shared_nodes", "pct_mean_dim", "pct_min_dim"])
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                st = overlap_stats(insts[a], insts[b])
                w.writerow([a, b, st["shared"], _fmt(st["pct_mean_dim"], 2),
                            _fmt(st["pct_min_dim"], 2)])
        tours = {}
        tours_dir = args.best_tours_dir
        if tours_dir is not None:
            for name in names:
                for suffix in (".opt.tour", ".tour"):
                    path = Path(tours_dir) / f"{name}{suffix}"
                    if path.is_file():
                        tour = load_opt_tour(path)
                        if tour.size == insts[name].dimension:
                            tours[name] = tour
                        break
        if len(tours) >= 2:
            print("")
            w.writerow(["a", "b", "pct_common_edges"])
            covered = [n for n in names if n in tours]
            for i, a in enumerate(covered):
                for b in covered[i + 1:]:
                    val = best_solution_overlap(insts[a], tours[a],
                                                insts[b], tours[b])
                    w.writerow([a, b, _fmt(val, 2)])
        return 0

    parser.error(f"unhandled command {args.command!r}")
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
