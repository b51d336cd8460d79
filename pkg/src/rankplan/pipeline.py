"""Training-data production: solve, post-process, featurize.

Each training problem contributes the states along one post-processed plan;
the label of a state is its remaining distance to the end of that plan.
Off-plan successor states are never included.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import RankplanError
from .features import FeatureLayout, FeatureVector, featurize, read_feature_csv, write_feature_csv
from .ff import FFEvaluator
from .grounding import GroundTask, State, validate
from .learn import ProblemGroup, TrainingSet
from .search import SOLVED, BaseFFEvaluator, Budget, gbfs_lazy

TRAINING_CAP = 10
DEFAULT_TRAIN_BUDGET = Budget(max_expansions=10**6, max_seconds=300.0)


class Unsolved(RankplanError):
    def __init__(self, problem_id: str, outcome: str):
        super().__init__(f"training problem '{problem_id}' not solved ({outcome})")
        self.problem_id = problem_id
        self.outcome = outcome


class InvalidInputPlan(RankplanError):
    pass


class DeadEndOnPlan(RankplanError):
    """The base heuristic reported a dead-end on a valid plan: a heuristic bug."""


@dataclass(frozen=True)
class TrainingRun:
    problem_id: str
    plan: list[int]
    group: ProblemGroup
    provenance: dict


def ff_featurizer(
    task: GroundTask,
    layout: FeatureLayout,
    ff: FFEvaluator | None = None,
) -> Callable[[State], FeatureVector | None]:
    """State featurizer over the base heuristic's DAG; None marks dead ends."""
    evaluator = ff or FFEvaluator(task)

    def extract(state: State) -> FeatureVector | None:
        dag = evaluator.evaluate(state).dag
        return featurize(dag, layout) if dag is not None else None

    return extract


def collect_plan(task: GroundTask, budget: Budget = DEFAULT_TRAIN_BUDGET,
                 problem_id: str = "?") -> list[int]:
    """Solve with the base planner under a generous budget."""
    result = gbfs_lazy(task, BaseFFEvaluator(task), budget)
    if result.outcome != SOLVED:
        raise Unsolved(problem_id, result.outcome)
    return result.plan


def action_elimination(task: GroundTask, plan: list[int]) -> list[int]:
    """Drop redundant steps: delete one step, cascade-drop steps whose
    preconditions break, and commit whenever the goal still holds.
    Repeats until a full pass makes no change."""
    if not validate(task, task.init, plan).valid:
        raise InvalidInputPlan("input plan does not validate from the initial state")
    current = list(plan)
    actions = task.actions
    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(current):
            kept: list[int] = []
            state: State = task.init
            for j, aid in enumerate(current):
                if j == i:
                    continue
                act = actions[aid]
                if act.pre <= state:
                    kept.append(aid)
                    state = (state - act.delete) | act.add
            if task.goal <= state:
                current = kept
                changed = True
            else:
                i += 1
    return current


def make_examples(
    task: GroundTask,
    plan: list[int],
    featurizer: Callable[[State], FeatureVector],
    problem_id: str,
) -> ProblemGroup:
    """One example per state along the plan; y counts remaining steps."""
    if not validate(task, task.init, plan).valid:
        raise InvalidInputPlan("plan does not validate from the initial state")
    length = len(plan)
    vecs: list[np.ndarray] = []
    state: State = task.init
    for j in range(length + 1):
        vec = featurizer(state)
        if vec is None:
            raise DeadEndOnPlan(
                f"problem '{problem_id}': dead-end reported at plan step {j}"
            )
        vecs.append(vec.values)
        if j < length:
            act = task.actions[plan[j]]
            state = (state - act.delete) | act.add
    ys = np.arange(length, -1, -1, dtype=float)
    return ProblemGroup(problem_id, np.array(vecs), ys)


def run_training_problem(
    task: GroundTask,
    problem_id: str,
    featurizer: Callable[[State], FeatureVector],
    budget: Budget = DEFAULT_TRAIN_BUDGET,
    post_process: bool = True,
) -> TrainingRun:
    raw = collect_plan(task, budget, problem_id)
    plan = action_elimination(task, raw) if post_process else list(raw)
    group = make_examples(task, plan, featurizer, problem_id)
    provenance = {
        "budget": {"max_expansions": budget.max_expansions, "max_seconds": budget.max_seconds},
        "post_processing": "action-elimination" if post_process else "none",
        "raw_length": len(raw),
        "final_length": len(plan),
    }
    return TrainingRun(problem_id, plan, group, provenance)


def select_training_problems(problem_ids: list[str], seed: int, cap: int = TRAINING_CAP) -> list[str]:
    """Fixed-seed random subset of the solved problems, at most `cap`."""
    ordered = sorted(problem_ids)
    if len(ordered) <= cap:
        return ordered
    return sorted(random.Random(seed).sample(ordered, cap))


# ---------------------------------------------------------------------------
# training-set archive: per-problem CSV dumps plus a manifest

def write_training_archive(directory, runs: list[TrainingRun], layout: FeatureLayout, seed: int) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "layout": layout.kind,
        "schemas": list(layout.schema_table),
        "seed": seed,
        "problems": [
            {
                "id": run.problem_id,
                "plan_length": len(run.plan),
                "provenance": run.provenance,
            }
            for run in runs
        ],
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    for run in runs:
        rows = [
            (FeatureVector(run.group.features[i], layout.signature), int(run.group.targets[i]), run.problem_id)
            for i in range(run.group.size)
        ]
        write_feature_csv(directory / f"{run.problem_id}.csv", layout, rows)


def read_training_archive(directory) -> tuple[TrainingSet, FeatureLayout, dict]:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    layout = FeatureLayout.make(manifest["layout"], tuple(manifest["schemas"]))
    groups = []
    for entry in manifest["problems"]:
        rows = read_feature_csv(directory / f"{entry['id']}.csv", layout)
        groups.append(ProblemGroup(
            entry["id"],
            np.array([r[0].values for r in rows]),
            np.array([r[1] for r in rows], dtype=float),
        ))
    return TrainingSet(tuple(groups), layout.signature), layout, manifest
