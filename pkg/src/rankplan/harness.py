"""Desk-scale experiment protocol and report table.

Per method: train on at most ten solved instances (plans post-processed by
action elimination), pick the regularization by leave-one-problem-out CV,
then search every held-out test instance under a fixed budget.  The report
aggregates plan length arithmetically and runtime/expansions geometrically,
over solved instances only, with cross-validated RMSE and tau alongside.
"""

from __future__ import annotations

import math
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import RankplanError
from .features import PAIRWISE, SINGLE, FeatureLayout, featurize
from .ff import FFEvaluator
from .generators import SIZE_KEYS, GenSpec, generate_instance
from .grounding import GroundTask, ground
from .learn import (
    LinearModel,
    SelectionResult,
    TrainingSet,
    base_heuristic_model,
    kendall_tau,
    loocv_select,
    rmse,
)
from .pipeline import (
    TrainingRun,
    Unsolved,
    action_elimination,
    collect_plan,
    make_examples,
    select_training_problems,
)
from .search import SOLVED, BaseFFEvaluator, Budget, LearnedEvaluator, gbfs_lazy

NONZERO_WEIGHT_EPS = 1e-8

CSV_COLUMNS = (
    "method", "coverage", "solved-count", "test-count", "mean-length",
    "geo-runtime-s", "geo-expansions", "cv-rmse", "cv-tau", "reg-param",
    "nonzero-feats", "total-feats", "train-time-s",
)


class ConfigError(RankplanError):
    pass


@dataclass(frozen=True)
class MethodSpec:
    name: str
    base: str = "ff"
    features: str | None = None    # None for the unlearned base heuristic
    learner: str | None = None     # "ridge" | "ranksvm"
    nonneg: bool = False


_METHOD_TABLE = {
    "ff-original": MethodSpec("ff-original"),
    "rr-single": MethodSpec("rr-single", features=SINGLE, learner="ridge"),
    "rr-pair": MethodSpec("rr-pair", features=PAIRWISE, learner="ridge"),
    "rsvm-single": MethodSpec("rsvm-single", features=SINGLE, learner="ranksvm"),
    "rsvm-pair": MethodSpec("rsvm-pair", features=PAIRWISE, learner="ranksvm"),
    "rsvm-single-nn": MethodSpec("rsvm-single-nn", features=SINGLE, learner="ranksvm", nonneg=True),
    "rsvm-pair-nn": MethodSpec("rsvm-pair-nn", features=PAIRWISE, learner="ranksvm", nonneg=True),
}


def method_from_name(name: str) -> MethodSpec:
    try:
        return _METHOD_TABLE[name]
    except KeyError:
        raise ConfigError(f"unknown method '{name}' (known: {', '.join(sorted(_METHOD_TABLE))})")


@dataclass(frozen=True)
class ExperimentConfig:
    family: str
    train_sizes: dict[str, tuple[int, int]]
    test_sizes: dict[str, tuple[int, int]]
    train_count: int
    test_count: int
    methods: tuple[MethodSpec, ...]
    seed: int = 0
    train_budget: Budget = Budget(max_expansions=10**6, max_seconds=300.0)
    test_budget: Budget = Budget(max_expansions=200_000)
    training_cap: int = 10
    jobs: int = 1

    def __post_init__(self):
        if self.family not in SIZE_KEYS:
            raise ConfigError(f"unknown family '{self.family}'")
        for label, sizes in (("train", self.train_sizes), ("test", self.test_sizes)):
            if set(sizes) != set(SIZE_KEYS[self.family]):
                raise ConfigError(f"{label}-sizes must define {SIZE_KEYS[self.family]}")
            for key, (lo, hi) in sizes.items():
                if not (1 <= lo <= hi):
                    raise ConfigError(f"{label}-sizes: bad range for '{key}'")
        if self.train_count < 0 or self.test_count < 0:
            raise ConfigError("instance counts must be non-negative")
        if not self.methods:
            raise ConfigError("at least one method is required")


@dataclass
class MethodReport:
    method: str
    solved: int
    test_count: int
    mean_length: float | None
    geo_runtime: float | None
    geo_expansions: float | None
    cv_rmse: float | None
    cv_tau: float | None
    reg_param: float | None
    nonzero_feats: int | None
    total_feats: int | None
    train_time: float | None

    def csv_cells(self) -> list[str]:
        def num(v, fmt):
            if v is None:
                return "None"
            return fmt.format(v)

        return [
            self.method,
            f"{self.solved}/{self.test_count}",
            str(self.solved),
            str(self.test_count),
            num(self.mean_length, "{:.2f}"),
            num(self.geo_runtime, "{:.4f}"),
            num(self.geo_expansions, "{:.1f}"),
            "" if self.cv_rmse is None else f"{self.cv_rmse:.4f}",
            "" if self.cv_tau is None else f"{self.cv_tau:.4f}",
            "" if self.reg_param is None else repr(self.reg_param),
            "" if self.nonzero_feats is None else str(self.nonzero_feats),
            "" if self.total_feats is None else str(self.total_feats),
            "" if self.train_time is None else f"{self.train_time:.3f}",
        ]


@dataclass
class ReportTable:
    family: str
    seed: int
    rows: list[MethodReport] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        lines += [",".join(r.csv_cells()) for r in self.rows]
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        header = list(CSV_COLUMNS)
        body = [[c if c != "" else "N/A" for c in r.csv_cells()] for r in self.rows]
        widths = [max(len(h), *(len(row[i]) for row in body)) if body else len(h)
                  for i, h in enumerate(header)]
        def fmt(cells):
            return "  ".join(c.ljust(w) for c, w in zip(cells, widths))
        rule = "-" * (sum(widths) + 2 * (len(widths) - 1))
        return "\n".join([f"{self.family} (seed {self.seed})", fmt(header), rule]
                         + [fmt(row) for row in body]) + "\n"

    def row(self, method: str) -> MethodReport:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)


# ---------------------------------------------------------------------------
# training-side assembly

@dataclass
class TrainingData:
    """Shared across methods: one featurization pass per layout kind."""
    runs: list[TrainingRun]
    sets: dict[str, TrainingSet]        # kind -> TrainingSet
    layouts: dict[str, FeatureLayout]


def build_training_data(
    tasks: dict[str, GroundTask],
    seed: int,
    budget: Budget,
    cap: int = 10,
) -> TrainingData:
    """Solve, post-process, and featurize the selected training problems.

    Problems the base planner cannot solve are skipped; problems whose plan
    is empty contribute a single example and are dropped (ranking needs at
    least one pair per group).
    """
    solved: dict[str, tuple[GroundTask, list[int], int]] = {}
    for pid in sorted(tasks):
        task = tasks[pid]
        try:
            raw = collect_plan(task, budget, pid)
        except Unsolved:
            continue
        plan = action_elimination(task, raw)
        if len(plan) >= 1:
            solved[pid] = (task, plan, len(raw))
    chosen = select_training_problems(list(solved), seed, cap)

    layouts: dict[str, FeatureLayout] = {}
    groups: dict[str, list] = {SINGLE: [], PAIRWISE: []}
    runs: list[TrainingRun] = []
    for pid in chosen:
        task, plan, raw_len = solved[pid]
        if not layouts:
            layouts = {kind: FeatureLayout.make(kind, task.schema_table) for kind in (SINGLE, PAIRWISE)}
        evaluator = FFEvaluator(task)
        dags = {}

        def featurizer_for(kind):
            layout = layouts[kind]

            def fz(state):
                if state not in dags:
                    dags[state] = evaluator.evaluate(state).dag
                dag = dags[state]
                return featurize(dag, layout) if dag is not None else None

            return fz

        for kind in (SINGLE, PAIRWISE):
            group = make_examples(task, plan, featurizer_for(kind), pid)
            groups[kind].append(group)
            if kind == SINGLE:
                runs.append(TrainingRun(pid, plan, group, {
                    "budget": {"max_expansions": budget.max_expansions,
                               "max_seconds": budget.max_seconds},
                    "post_processing": "action-elimination",
                    "raw_length": raw_len,
                    "final_length": len(plan),
                }))
    if not runs:
        raise ConfigError("no training problem was solved; nothing to learn from")
    sets = {kind: TrainingSet(tuple(gs), layouts[kind].signature) for kind, gs in groups.items()}
    return TrainingData(runs, sets, layouts)


@dataclass
class TrainedMethod:
    spec: MethodSpec
    model: LinearModel
    layout: FeatureLayout | None
    cv_rmse: float | None
    cv_tau: float | None
    reg_param: float | None
    train_time: float | None
    selection: SelectionResult | None = None


def train_method(spec: MethodSpec, data: TrainingData) -> TrainedMethod:
    if spec.learner is None:
        layout = data.layouts[SINGLE]
        model = base_heuristic_model(layout)
        ts = data.sets[SINGLE]
        return TrainedMethod(spec, model, None, rmse(ts, model), kendall_tau(ts, model),
                             None, None)
    ts = data.sets[spec.features]
    layout = data.layouts[spec.features]
    start = time.perf_counter()
    sel = loocv_select(ts, spec.learner, nonneg=spec.nonneg)
    elapsed = time.perf_counter() - start
    return TrainedMethod(spec, sel.model, layout, sel.cv_rmse, sel.cv_tau,
                         sel.best_param, elapsed, sel)


# ---------------------------------------------------------------------------
# evaluation side

def _evaluate_one(task: GroundTask, trained: TrainedMethod, budget: Budget):
    if trained.spec.learner is None:
        evaluator = BaseFFEvaluator(task)
    else:
        evaluator = LearnedEvaluator(task, trained.model, trained.layout)
    result = gbfs_lazy(task, evaluator, budget)
    return (
        result.outcome,
        len(result.plan) if result.outcome == SOLVED else None,
        result.stats.runtime,
        result.stats.expansions,
    )


def _evaluate_one_star(args):
    return _evaluate_one(*args)


def evaluate_method(
    trained: TrainedMethod,
    tasks: dict[str, GroundTask],
    budget: Budget,
    jobs: int = 1,
) -> list[tuple[str, str, int | None, float, int]]:
    """(problem, outcome, length, runtime, expansions) per test task."""
    ordered = sorted(tasks)
    work = [(tasks[pid], trained, budget) for pid in ordered]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_evaluate_one_star, work))
    else:
        outcomes = [_evaluate_one(*w) for w in work]
    return [(pid,) + out for pid, out in zip(ordered, outcomes)]


def _geo_mean(values: list[float]) -> float:
    return float(math.exp(np.mean([math.log(max(v, 1e-9)) for v in values])))


def summarize(trained: TrainedMethod, results, test_count: int) -> MethodReport:
    solved = [(length, runtime, exp) for _, outcome, length, runtime, exp in results
              if outcome == SOLVED]
    if trained.spec.learner is None:
        nonzero = total = None
    else:
        nonzero = int((np.abs(trained.model.w) > NONZERO_WEIGHT_EPS).sum())
        total = len(trained.model.w)
    return MethodReport(
        method=trained.spec.name,
        solved=len(solved),
        test_count=test_count,
        mean_length=float(np.mean([s[0] for s in solved])) if solved else None,
        geo_runtime=_geo_mean([s[1] for s in solved]) if solved else None,
        geo_expansions=_geo_mean([max(s[2], 1) for s in solved]) if solved else None,
        cv_rmse=trained.cv_rmse,
        cv_tau=trained.cv_tau,
        reg_param=trained.reg_param,
        nonzero_feats=nonzero,
        total_feats=total,
        train_time=trained.train_time,
    )


# ---------------------------------------------------------------------------
# full protocol

def sample_instance_specs(config: ExperimentConfig) -> tuple[list[GenSpec], list[GenSpec]]:
    rng = random.Random(config.seed)

    def sample(sizes: dict[str, tuple[int, int]], count: int, tag: int) -> list[GenSpec]:
        specs = []
        for i in range(count):
            chosen = {k: rng.randint(lo, hi) for k, (lo, hi) in sorted(sizes.items())}
            specs.append(GenSpec(config.family, chosen, seed=config.seed * 100_000 + tag * 10_000 + i))
        return specs

    return sample(config.train_sizes, config.train_count, 1), \
        sample(config.test_sizes, config.test_count, 2)


def run_experiment(config: ExperimentConfig) -> ReportTable:
    train_specs, test_specs = sample_instance_specs(config)

    def ground_all(specs: list[GenSpec]) -> dict[str, GroundTask]:
        out = {}
        for spec in specs:
            dom, prob = generate_instance(spec)
            out[prob.name] = ground(dom, prob)
        return out

    train_tasks = ground_all(train_specs)
    test_tasks = ground_all(test_specs)

    table = ReportTable(config.family, config.seed)
    if config.test_count == 0 and config.train_count == 0:
        for spec in config.methods:
            table.rows.append(MethodReport(spec.name, 0, 0, None, None, None,
                                           None, None, None, None, None, None))
        return table

    data = build_training_data(train_tasks, config.seed, config.train_budget, config.training_cap)
    for spec in config.methods:
        trained = train_method(spec, data)
        results = evaluate_method(trained, test_tasks, config.test_budget, config.jobs)
        table.rows.append(summarize(trained, results, len(test_tasks)))
    return table


# ---------------------------------------------------------------------------
# config files: flat key = value lines, '#' comments

def _parse_sizes(text: str) -> dict[str, tuple[int, int]]:
    sizes = {}
    for part in text.replace(",", " ").split():
        key, _, rng = part.partition("=")
        if not rng:
            raise ConfigError(f"bad size entry '{part}' (expected key=lo..hi)")
        lo, _, hi = rng.partition("..")
        sizes[key] = (int(lo), int(hi or lo))
    return sizes


def load_config(path) -> ExperimentConfig:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        entries[key.strip()] = value.strip()

    def need(key: str) -> str:
        if key not in entries:
            raise ConfigError(f"{path}: missing required key '{key}'")
        return entries[key]

    def opt_float(key: str, default: float | None) -> float | None:
        if key not in entries:
            return default
        value = float(entries[key])
        return None if value <= 0 else value

    def opt_int(key: str, default: int | None) -> int | None:
        if key not in entries:
            return default
        value = int(entries[key])
        return None if value <= 0 else value

    methods = tuple(method_from_name(m) for m in need("methods").replace(",", " ").split())
    return ExperimentConfig(
        family=need("family"),
        train_sizes=_parse_sizes(need("train-sizes")),
        test_sizes=_parse_sizes(need("test-sizes")),
        train_count=int(need("train-count")),
        test_count=int(need("test-count")),
        methods=methods,
        seed=int(entries.get("seed", "0")),
        train_budget=Budget(
            max_expansions=opt_int("train-max-expansions", 10**6),
            max_seconds=opt_float("train-max-seconds", 300.0),
        ),
        test_budget=Budget(
            max_expansions=opt_int("test-max-expansions", 200_000),
            max_seconds=opt_float("test-max-seconds", None),
        ),
        training_cap=int(entries.get("training-cap", "10")),
        jobs=int(entries.get("jobs", "1")),
    )
