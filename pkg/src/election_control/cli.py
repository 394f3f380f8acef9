"""Command-line entry point: ``election-control <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .cascade import DEFAULT_SCENARIOS, dump_batch, sample_batch
from .election import ControlProblem, Mode, Objective, load_preferences, write_preferences
from .errors import ElectionControlError
from .exact import (
    DEFAULT_ENUMERATION_CAP,
    branch_and_bound,
    brute_force,
    build_milp,
    export_lp,
    export_mps,
)
from .graph import load_edge_list
from .greedy import make_schedule, optimize_mov, optimize_pov
from .harness import ExperimentConfig, derive_seed, generate_profile, run_pov_sweep, run_ratio_study
from .objectives import estimate


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _dump(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _graph(args):
    return load_edge_list(args.graph, default_p=args.p, symmetrize=args.symmetrize)


def _problem(args) -> ControlProblem:
    g = _graph(args)
    profile = load_preferences(args.prefs)
    return ControlProblem(g, profile, Mode(args.mode), args.k)


def _write_labels(g, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            for i, label in enumerate(g.labels):
                fh.write(f"{i} {label}\n")


def cmd_sample(args) -> None:
    g = _graph(args)
    batch = sample_batch(g, args.scenarios, args.seed, args.workers)
    if not args.out:
        raise ElectionControlError("sample needs --out")
    dump_batch(batch, args.out)
    _write_labels(g, args.labels_out)


def _optimise(args, objective: Objective) -> None:
    start = time.perf_counter()
    problem = _problem(args)
    g = problem.graph
    batch = sample_batch(g, args.scenarios, args.seed, args.workers)
    doc = {"mode": problem.mode.value, "k": problem.k}
    if objective is Objective.MOV:
        trace = optimize_mov(problem, batch)
        seeds = sorted(trace.chosen)
        doc["algorithm"] = f"mov_{problem.mode.value}"
        doc["surrogate_value"] = trace.value / batch.total_weight.item()
        doc["schedule_info"] = None
        doc["selection_order"] = trace.chosen
    else:
        schedule = make_schedule(problem, args.thresholds, args.seed)
        res = optimize_pov(problem, batch, schedule=schedule, workers=args.workers)
        seeds = list(res.seeds)
        doc["algorithm"] = f"pov_{problem.mode.value}"
        best = None
        if res.best_cap is not None:
            best = next(r for r in res.runs if r.cap == res.best_cap)
        doc["surrogate_value"] = None if best is None else best.trace.value / batch.total_weight.item()
        info = res.schedule.describe() if res.schedule is not None else None
        if info is not None:
            info["best_cap"] = res.best_cap
        doc["schedule_info"] = info
        doc["batch_pov"] = res.pov
    fresh = sample_batch(g, args.eval_scenarios or args.scenarios, derive_seed(args.seed, 1), args.workers)
    doc["seeds"] = seeds
    doc["seed_labels"] = [g.labels[s] for s in seeds]
    doc[f"{objective.value}_estimate"] = estimate(problem, seeds, fresh, objective).to_dict()
    if not args.omit_timing:
        doc["wall_time"] = time.perf_counter() - start
    _emit(_dump(doc), args.out)
    _write_labels(g, args.labels_out)


def cmd_mov(args) -> None:
    _optimise(args, Objective.MOV)


def cmd_pov(args) -> None:
    _optimise(args, Objective.POV)


def cmd_oracle(args) -> None:
    problem = _problem(args)
    batch = sample_batch(problem.graph, args.scenarios, args.seed, args.workers)
    obj = Objective(args.objective)
    if args.method == "brute-force":
        res = brute_force(problem, batch, problem.k, obj, args.cap, args.workers)
    else:
        res = branch_and_bound(problem, batch, problem.k, obj)
    doc = {
        "method": args.method,
        "objective": obj.value,
        "mode": problem.mode.value,
        "k": problem.k,
        "best_set": list(res.best_set),
        "best_labels": [problem.graph.labels[s] for s in res.best_set],
        "best_value": res.best_value,
        "enumerated": res.enumerated,
    }
    _emit(_dump(doc), args.out)


def cmd_milp_export(args) -> None:
    problem = _problem(args)
    batch = sample_batch(problem.graph, args.scenarios, args.seed, args.workers)
    model = build_milp(problem, batch, problem.k, Objective(args.objective))
    if not args.out:
        raise ElectionControlError("milp-export needs --out")
    export_lp(model, args.out)
    if args.mps:
        export_mps(model, Path(args.out).with_suffix(".mps"))


def cmd_gen_prefs(args) -> None:
    if args.n is None:
        if not args.graph:
            raise ElectionControlError("gen-prefs needs --n or --graph")
        # only the node count matters here
        n = load_edge_list(args.graph, default_p=0.0 if args.p is None else args.p, symmetrize=args.symmetrize).n
    else:
        n = args.n
    profile = generate_profile(n, args.candidates[0], args.seed)
    if not args.out:
        raise ElectionControlError("gen-prefs needs --out")
    write_preferences(profile, args.out)


def _config(args, **defaults) -> ExperimentConfig:
    fields = dict(
        graph=args.graph or defaults["graph"],
        p=args.p if args.p is not None else 0.1,
        ks=tuple(args.k_list or defaults["ks"]),
        candidates=tuple(args.candidates or defaults["candidates"]),
        trials=args.trials or defaults["trials"],
        r=args.scenarios,
        master_seed=args.seed,
        modes=tuple(args.mode_list or defaults["modes"]),
        objectives=tuple(args.objective_list or defaults["objectives"]),
        thresholds=args.thresholds,
        eval_scenarios=args.eval_scenarios,
        symmetrize=args.symmetrize,
        cap=args.cap,
        brute_force_limit=args.brute_force_limit,
        workers=args.workers,
    )
    return ExperimentConfig(**fields)


def cmd_ratio_study(args) -> None:
    cfg = _config(args, graph="er:100:5", ks=[3, 5], candidates=[2, 5], trials=30,
                  modes=["constructive", "destructive"], objectives=["mov"])
    study = run_ratio_study(cfg)
    if args.format == "csv":
        _emit(study.cells_csv(), args.out)
        if args.out:
            Path(args.out).with_suffix(".records.csv").write_text(study.records_csv(), encoding="utf-8")
    else:
        _emit(study.to_json(), args.out)


def cmd_pov_sweep(args) -> None:
    cfg = _config(args, graph="er:100:4", ks=[2], candidates=[3], trials=100,
                  modes=["constructive"], objectives=["pov"])
    sweep = run_pov_sweep(cfg)
    _emit(sweep.to_csv() if args.format == "csv" else sweep.to_json(), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="election-control", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, problem=True):
        p.add_argument("--graph", required=problem, help="edge list file (or er:N:DEG / ba:N:M for studies)")
        p.add_argument("--p", type=float, default=None, help="probability for edges without one")
        p.add_argument("--symmetrize", action="store_true", help="read each line as two directed edges")
        p.add_argument("--scenarios", type=int, default=DEFAULT_SCENARIOS)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out")
        if problem:
            p.add_argument("--prefs", required=True)
            p.add_argument("--k", type=int, required=True)
            p.add_argument("--mode", choices=[m.value for m in Mode], default="constructive")

    p = sub.add_parser("sample", help="dump a scenario batch")
    common(p, problem=False)
    p.add_argument("--labels-out")
    p.set_defaults(func=cmd_sample)

    for name, fn in (("mov", cmd_mov), ("pov", cmd_pov)):
        p = sub.add_parser(name, help=f"optimise {name.upper()}")
        common(p)
        p.add_argument("--eval-scenarios", type=int, default=0,
                       help="size of the fresh batch for the reported estimate (default --scenarios)")
        p.add_argument("--thresholds", default="auto", help="auto, exhaustive or sampled:N")
        p.add_argument("--omit-timing", action="store_true", help="leave wall_time out of the JSON")
        p.add_argument("--labels-out")
        p.add_argument("--format", choices=["json"], default="json")
        p.set_defaults(func=fn)

    p = sub.add_parser("oracle", help="exact optimum on a sampled batch")
    common(p)
    p.add_argument("--objective", choices=["mov", "pov"], default="mov")
    p.add_argument("--method", choices=["brute-force", "branch-and-bound"], default="brute-force")
    p.add_argument("--cap", type=int, default=DEFAULT_ENUMERATION_CAP)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("milp-export", help="write the MILP as LP (and MPS)")
    common(p)
    p.add_argument("--objective", choices=["mov", "pov"], default="mov")
    p.add_argument("--mps", action="store_true", help="also write fixed-form MPS next to --out")
    p.set_defaults(func=cmd_milp_export)

    p = sub.add_parser("gen-prefs", help="random uniform preference profile")
    common(p, problem=False)
    p.add_argument("--n", type=int)
    p.add_argument("--candidates", type=int, nargs="+", default=[2])
    p.set_defaults(func=cmd_gen_prefs)

    for name, fn in (("ratio-study", cmd_ratio_study), ("pov-sweep", cmd_pov_sweep)):
        p = sub.add_parser(name)
        common(p, problem=False)
        p.set_defaults(scenarios=300 if name == "ratio-study" else 100)
        p.add_argument("--k", dest="k_list", type=int, nargs="+")
        p.add_argument("--candidates", type=int, nargs="+")
        p.add_argument("--mode", dest="mode_list", nargs="+", choices=[m.value for m in Mode])
        p.add_argument("--objective", dest="objective_list", nargs="+", choices=["mov", "pov"])
        p.add_argument("--trials", type=int)
        p.add_argument("--thresholds", default="auto")
        p.add_argument("--eval-scenarios", type=int, default=0)
        p.add_argument("--cap", type=int, default=DEFAULT_ENUMERATION_CAP)
        p.add_argument("--brute-force-limit", type=int, default=20_000,
                       help="larger enumerations use branch and bound")
        p.add_argument("--format", choices=["json", "csv"], default="csv")
        p.set_defaults(func=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ElectionControlError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
