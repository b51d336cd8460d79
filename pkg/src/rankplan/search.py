"""Lazy greedy best-first search with alternating dual open lists.

Generated nodes are keyed by their parent's evaluated heuristic value and
only evaluated when popped.  Two FIFO-tie-broken priority queues alternate
strictly: one holds every generated node, the other only nodes reached via
a preferred operator of the base heuristic.  Duplicate states are dropped
at generation time, so no state is ever expanded twice.
"""

from __future__ import annotations

import hashlib
import heapq
import time
from dataclasses import dataclass, field
from typing import Protocol

from .errors import LayoutMismatch
from .features import FeatureLayout, featurize
from .ff import FFEvaluator
from .grounding import GroundTask, State
from .learn import LinearModel, predict

SOLVED = "solved"
UNSOLVABLE = "unsolvable"
OUT_OF_BUDGET = "out-of-budget"


class Evaluator(Protocol):
    def evaluate(self, state: State) -> tuple[int | float | None, frozenset[int]]:
        """Heuristic key (None marks a dead-end) and preferred action ids."""


class BaseFFEvaluator:
    def __init__(self, task: GroundTask, ff: FFEvaluator | None = None):
        self._ff = ff or FFEvaluator(task)

    def evaluate(self, state: State) -> tuple[int | None, frozenset[int]]:
        report = self._ff.evaluate(state)
        return report.h, report.preferred


class LearnedEvaluator:
    """Scores states with a linear model over the base heuristic's DAG.

    Preferred operators still come from the base heuristic; base dead-ends
    stay dead-ends.  With integerize=False the raw (unrounded, unscaled)
    prediction is used, which tests rely on for affine-invariance checks.
    """

    def __init__(
        self,
        task: GroundTask,
        model: LinearModel,
        layout: FeatureLayout,
        base: FFEvaluator | None = None,
        integerize: bool = True,
    ):
        if model.signature != layout.signature:
            raise LayoutMismatch("model was trained with a different feature layout")
        expected = FeatureLayout.make(layout.kind, task.schema_table)
        if expected.signature != layout.signature:
            raise LayoutMismatch(
                "model layout does not match this task's action schemas "
                f"(model: {layout.schema_table}, task: {task.schema_table})"
            )
        self._ff = base or FFEvaluator(task)
        self._model = model
        self._layout = layout
        self._integerize = integerize

    def evaluate(self, state: State) -> tuple[int | float | None, frozenset[int]]:
        report = self._ff.evaluate(state)
        if report.h is None:
            return None, frozenset()
        vec = featurize(report.dag, self._layout)
        if self._integerize:
            return predict(self._model, vec), report.preferred
        return max(0.0, float(vec.values @ self._model.w)), report.preferred


def make_learned_evaluator(
    task: GroundTask,
    model: LinearModel,
    layout: FeatureLayout,
    base: FFEvaluator | None = None,
    integerize: bool = True,
) -> LearnedEvaluator:
    return LearnedEvaluator(task, model, layout, base=base, integerize=integerize)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Budget:
    max_expansions: int | None = None
    max_seconds: float | None = None
    max_memory_mb: float | None = None


@dataclass
class SearchStats:
    expansions: int = 0
    evaluations: int = 0
    generated: int = 0
    runtime: float = 0.0


@dataclass
class SearchResult:
    outcome: str
    plan: list[int] | None
    stats: SearchStats
    log: list[tuple[int, str, float, str]] = field(default_factory=list)


def _state_digest(state: State) -> str:
    packed = b"".join(f.to_bytes(4, "little") for f in sorted(state))
    return hashlib.blake2b(packed, digest_size=8).hexdigest()


def gbfs_lazy(
    task: GroundTask,
    evaluator: Evaluator,
    budget: Budget = Budget(),
    keep_log: bool = False,
    preferred_boost: int = 0,
) -> SearchResult:
    """Lazy GBFS over dual open lists.

    `preferred_boost` grants the preferred queue that many extra pops per
    alternation round; 0 keeps the strict 1:1 alternation.
    """
    start_time = time.perf_counter()
    stats = SearchStats()
    log: list[tuple[int, str, float, str]] = []

    actions = task.actions
    goal = task.goal

    # per-node arrays; exactly one node per distinct state
    states: list[State] = [task.init]
    parents: list[int] = [-1]
    via_action: list[int] = [-1]
    expanded: list[bool] = [False]
    seen: set[State] = {task.init}

    h0, pref0 = evaluator.evaluate(task.init)
    stats.evaluations += 1
    if h0 is None:
        stats.runtime = time.perf_counter() - start_time
        return SearchResult(UNSOLVABLE, None, stats, log)

    q_all: list[tuple[float, int, int]] = [(h0, 0, 0)]
    q_pref: list[tuple[float, int, int]] = [(h0, 0, 0)]
    seq = 1
    turn = 0  # 0 -> q_all, >= 1 -> q_pref
    cycle = 2 + max(0, preferred_boost)
    init_h = {0: (h0, pref0)}

    pops = 0

    def out_of_budget() -> bool:
        if budget.max_expansions is not None and stats.expansions >= budget.max_expansions:
            return True
        if budget.max_seconds is not None:
            if time.perf_counter() - start_time > budget.max_seconds:
                return True
        if budget.max_memory_mb is not None and (pops - 1) % 128 == 0:
            import psutil

            rss_mb = psutil.Process().memory_info().rss / (1024 * 1024)
            if rss_mb > budget.max_memory_mb:
                return True
        return False

    while q_all or q_pref:
        queue = q_pref if (turn >= 1 and q_pref) or not q_all else q_all
        tag = "pref" if queue is q_pref else "all"
        _, _, nid = heapq.heappop(queue)
        if expanded[nid]:
            continue
        pops += 1
        if out_of_budget():
            stats.runtime = time.perf_counter() - start_time
            return SearchResult(OUT_OF_BUDGET, None, stats, log)

        state = states[nid]
        if nid in init_h:
            h, preferred = init_h.pop(nid)
        else:
            h, preferred = evaluator.evaluate(state)
            stats.evaluations += 1
        expanded[nid] = True
        if h is None:
            continue  # base-heuristic dead-end

        stats.expansions += 1
        turn = (turn + 1) % cycle
        if keep_log:
            log.append((stats.expansions - 1, _state_digest(state), h, tag))

        if goal <= state:
            plan: list[int] = []
            cur = nid
            while parents[cur] != -1:
                plan.append(via_action[cur])
                cur = parents[cur]
            plan.reverse()
            stats.runtime = time.perf_counter() - start_time
            return SearchResult(SOLVED, plan, stats, log)

        for aid, act in enumerate(actions):
            if act.pre <= state:
                succ = (state - act.delete) | act.add
                if succ in seen:
                    continue
                seen.add(succ)
                child = len(states)
                states.append(succ)
                parents.append(nid)
                via_action.append(aid)
                expanded.append(False)
                entry = (h, seq, child)
                seq += 1
                heapq.heappush(q_all, entry)
                if aid in preferred:
                    heapq.heappush(q_pref, entry)
                stats.generated += 1

    stats.runtime = time.perf_counter() - start_time
    return SearchResult(UNSOLVABLE, None, stats, log)


def write_expansion_log(path, log: list[tuple[int, str, float, str]]) -> None:
    with open(path, "w") as fh:
        for seq_no, digest, h, tag in log:
            fh.write(f"{seq_no} {digest} {h} {tag}\n")
