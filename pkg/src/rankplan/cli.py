"""Command-line entry point.

Exit codes: 0 success (for `plan`: solved), 1 unsolvable, 2 out of budget,
3 any library error (diagnostic on stderr).  All subcommands are
deterministic given identical inputs and seeds.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import generators, harness, pipeline, plots
from .errors import RankplanError
from .features import FeatureLayout
from .grounding import format_plan, ground, validate
from .learn import TrainingSet, load_model, loocv_select, save_model
from .pddl import parse_domain, parse_problem
from .search import (
    SOLVED,
    UNSOLVABLE,
    BaseFFEvaluator,
    Budget,
    LearnedEvaluator,
    gbfs_lazy,
    write_expansion_log,
)

EXIT_UNSOLVABLE = 1
EXIT_BUDGET = 2
EXIT_ERROR = 3


def scratch_dir() -> Path:
    return Path(os.environ.get("RANKPLAN_SCRATCH", "."))


def _load_task(domain_path: str, problem_path: str):
    dom = parse_domain(Path(domain_path).read_text())
    prob = parse_problem(Path(problem_path).read_text(), dom)
    return dom, prob, ground(dom, prob)


def _budget(args) -> Budget:
    return Budget(
        max_expansions=args.max_expansions,
        max_seconds=args.max_seconds,
        max_memory_mb=getattr(args, "max_memory_mb", None),
    )


def _add_budget_flags(sub, expansions=None, seconds=None):
    sub.add_argument("--max-expansions", type=int, default=expansions)
    sub.add_argument("--max-seconds", type=float, default=seconds)


def _parse_sizes_arg(text: str) -> dict[str, int]:
    sizes = {}
    for part in text.replace(",", " ").split():
        key, _, value = part.partition("=")
        if not value:
            raise harness.ConfigError(f"bad --params entry '{part}' (expected key=value)")
        sizes[key] = int(value)
    return sizes


# ---------------------------------------------------------------------------
# subcommands

def cmd_gen(args) -> int:
    spec = generators.GenSpec(args.family, _parse_sizes_arg(args.params), args.seed)
    domain_text, problem_text = generators.generate_pddl(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    domain_path = out / "domain.pddl"
    problem_path = out / f"{spec.problem_name()}.pddl"
    domain_path.write_text(domain_text)
    problem_path.write_text(problem_text)
    print(domain_path)
    print(problem_path)
    return 0


def cmd_plan(args) -> int:
    _, _, task = _load_task(args.domain, args.problem)
    if args.model:
        model, layout = load_model(args.model)
        evaluator = LearnedEvaluator(task, model, layout)
    else:
        evaluator = BaseFFEvaluator(task)
    result = gbfs_lazy(task, evaluator, _budget(args), keep_log=bool(args.log_expansions),
                       preferred_boost=args.preferred_boost)
    if args.log_expansions:
        write_expansion_log(args.log_expansions, result.log)
    stats = result.stats
    print(f"{result.outcome}: {stats.expansions} expansions, "
          f"{stats.evaluations} evaluations, {stats.runtime:.3f}s", file=sys.stderr)
    if result.outcome == SOLVED:
        out = Path(args.out) if args.out else Path(args.problem).with_suffix(".plan")
        out.write_text(format_plan(task, result.plan))
        print(out)
        return 0
    if result.outcome == UNSOLVABLE:
        return EXIT_UNSOLVABLE
    return EXIT_BUDGET


def _training_set_from_problems(args, kind: str):
    dom = parse_domain(Path(args.domain).read_text())
    groups = []
    layout = None
    budget = _budget(args)
    for problem_path in args.problems:
        prob = parse_problem(Path(problem_path).read_text(), dom)
        task = ground(dom, prob)
        if layout is None:
            layout = FeatureLayout.make(kind, task.schema_table)
        run = pipeline.run_training_problem(
            task, prob.name, pipeline.ff_featurizer(task, layout), budget)
        if run.group.size < 2:
            print(f"note: '{prob.name}' contributes a single example; skipped", file=sys.stderr)
            continue
        groups.append(run.group)
    if not groups:
        raise RankplanError("no usable training problems (none solved, or all trivial)")
    return TrainingSet(tuple(groups), layout.signature), layout


_KIND = {"single": "single", "pair": "pairwise"}
_LEARNER = {"rr": "ridge", "ranksvm": "ranksvm"}


def cmd_train(args) -> int:
    ts, layout = _training_set_from_problems(args, _KIND[args.features])
    grid = [float(x) for x in args.grid.split(",")] if args.grid else None
    sel = loocv_select(ts, _LEARNER[args.learner], nonneg=args.nonneg, grid=grid)
    save_model(sel.model, layout, args.out)
    print(f"method: {sel.method}  chosen-param: {sel.best_param!r}")
    print(f"cv-rmse: {sel.cv_rmse:.6f}  cv-tau: {sel.cv_tau:.6f}")
    print(args.out)
    return 0


def cmd_xval(args) -> int:
    ts, _ = _training_set_from_problems(args, _KIND[args.features])
    grid = [float(x) for x in args.grid.split(",")] if args.grid else None
    sel = loocv_select(ts, _LEARNER[args.learner], nonneg=args.nonneg, grid=grid)
    print("param,cv-rmse,cv-tau,chosen")
    for pt in sel.grid:
        chosen = "*" if pt.param == sel.best_param else ""
        print(f"{pt.param!r},{pt.cv_rmse:.6f},{pt.cv_tau:.6f},{chosen}")
    return 0


def cmd_eval(args) -> int:
    from .learn import kendall_tau, rmse

    model, layout = load_model(args.model)
    dom = parse_domain(Path(args.domain).read_text())
    budget = _budget(args)
    lines = ["problem,examples,rmse,tau"]
    groups = []
    for problem_path in args.problems:
        prob = parse_problem(Path(problem_path).read_text(), dom)
        task = ground(dom, prob)
        expected = FeatureLayout.make(layout.kind, task.schema_table)
        if expected.signature != layout.signature:
            raise RankplanError(f"model layout does not match domain '{dom.name}'")
        run = pipeline.run_training_problem(
            task, prob.name, pipeline.ff_featurizer(task, layout), budget)
        group_ts = TrainingSet((run.group,), layout.signature)
        r = rmse(group_ts, model)
        t = kendall_tau(group_ts, model) if run.group.size >= 2 else float("nan")
        groups.append(run.group)
        lines.append(f"{prob.name},{run.group.size},{r:.6f},{t:.6f}")
    full = TrainingSet(tuple(groups), layout.signature)
    r = rmse(full, model)
    scorable = TrainingSet(tuple(g for g in groups if g.size >= 2), layout.signature) \
        if any(g.size >= 2 for g in groups) else None
    t = kendall_tau(scorable, model) if scorable else float("nan")
    lines.append(f"ALL,{sum(g.size for g in groups)},{r:.6f},{t:.6f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(args.out)
    else:
        print(text, end="")
    return 0


def cmd_experiment(args) -> int:
    import dataclasses

    config = harness.load_config(args.config)
    if args.jobs is not None:
        config = dataclasses.replace(config, jobs=args.jobs)
    table = harness.run_experiment(config)
    out_dir = Path(args.out) if args.out else scratch_dir() / f"experiment-{config.family}-s{config.seed}"
    created = plots.write_report(table, out_dir, figures=not args.no_figures)
    print(table.to_text(), end="")
    for path in created:
        print(path)
    return 0


def cmd_validate(args) -> int:
    from .grounding import parse_plan

    _, _, task = _load_task(args.domain, args.problem)
    plan = parse_plan(Path(args.plan).read_text(), task)
    result = validate(task, task.init, plan)
    if result.valid:
        print(f"valid, length {result.length}")
        return 0
    print(f"invalid at step {result.failed_step}", file=sys.stderr)
    return EXIT_UNSOLVABLE


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankplan",
        description="Greedy STRIPS planner with per-domain learned ranking heuristics.",
        epilog="Exit codes: 0 success/solved, 1 unsolvable, 2 out of budget, 3 error.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic instance")
    p.add_argument("--family", required=True, choices=sorted(generators.SIZE_KEYS))
    p.add_argument("--params", required=True, help="e.g. locations=4,packages=2,vehicles=1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("plan", help="solve one problem")
    p.add_argument("domain")
    p.add_argument("problem")
    p.add_argument("--model", help="learned-heuristic model file")
    p.add_argument("--out", help="plan file (default: problem path with .plan)")
    p.add_argument("--log-expansions", help="write an expansion log to this file")
    p.add_argument("--max-memory-mb", type=float, default=None)
    p.add_argument("--preferred-boost", type=int, default=0,
                   help="extra preferred-queue pops per alternation round")
    _add_budget_flags(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("train", help="learn a heuristic from training problems")
    p.add_argument("domain")
    p.add_argument("problems", nargs="+")
    p.add_argument("--features", required=True, choices=["single", "pair"])
    p.add_argument("--learner", required=True, choices=["rr", "ranksvm"])
    p.add_argument("--nonneg", action="store_true")
    p.add_argument("--grid", help="comma-separated ascending parameter grid")
    p.add_argument("--out", required=True, help="model file to write")
    _add_budget_flags(p, expansions=10**6, seconds=300.0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("xval", help="LOOCV score table without a final model")
    p.add_argument("domain")
    p.add_argument("problems", nargs="+")
    p.add_argument("--features", required=True, choices=["single", "pair"])
    p.add_argument("--learner", required=True, choices=["rr", "ranksvm"])
    p.add_argument("--nonneg", action="store_true")
    p.add_argument("--grid")
    _add_budget_flags(p, expansions=10**6, seconds=300.0)
    p.set_defaults(func=cmd_xval)

    p = sub.add_parser("eval", help="score a model's predictions on problems")
    p.add_argument("model")
    p.add_argument("domain")
    p.add_argument("problems", nargs="+")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    _add_budget_flags(p, expansions=10**6, seconds=300.0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="run the full protocol from a config file")
    p.add_argument("config")
    p.add_argument("--out", help="report directory (default under RANKPLAN_SCRATCH)")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("validate", help="check a plan file against a problem")
    p.add_argument("domain")
    p.add_argument("problem")
    p.add_argument("plan")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RankplanError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
