"""FF delete-relaxation heuristic and its relaxed-plan DAG.

The relaxed planning graph is built by counter-based layering; the relaxed
plan is extracted backwards with a deterministic supporter rule (earliest
action layer, then lowest action id).  The extracted plan is exposed as a
DAG over action vertices plus a state dummy (effects only) and a goal dummy
(preconditions only) — the substrate the feature mappings consume.
"""

from __future__ import annotations

from dataclasses import dataclass

from .grounding import GroundTask, State

UNREACHED = 1 << 30

ACTION_VERTEX = "action"
STATE_VERTEX = "state"
GOAL_VERTEX = "goal"


@dataclass(frozen=True)
class RelaxedPlanningGraph:
    fact_layer: list[int]     # UNREACHED if never appears
    action_layer: list[int]
    depth: int                # number of fact layers built beyond layer 0
    goals_reached: bool


@dataclass(frozen=True)
class DagVertex:
    kind: str                 # ACTION_VERTEX / STATE_VERTEX / GOAL_VERTEX
    action_id: int | None
    schema_id: int            # sentinel ids for the dummies
    pre: frozenset[int]
    eff: frozenset[int]


@dataclass(frozen=True)
class PlanDAG:
    vertices: tuple[DagVertex, ...]
    edges: tuple[tuple[int, int], ...]   # (supporter index, consumer index)
    base_h: int
    layers: int
    unsat_goals: int

    @property
    def action_count(self) -> int:
        return sum(1 for v in self.vertices if v.kind == ACTION_VERTEX)


@dataclass(frozen=True)
class HeuristicReport:
    h: int | None             # None marks a relaxed dead-end (infinite estimate)
    dag: PlanDAG | None
    preferred: frozenset[int]

    @property
    def is_dead_end(self) -> bool:
        return self.h is None


def state_schema_id(schema_table: tuple[str, ...]) -> int:
    return len(schema_table)


def goal_schema_id(schema_table: tuple[str, ...]) -> int:
    return len(schema_table) + 1


class FFEvaluator:
    """Reusable evaluator; holds per-task adjacency and scratch state.

    Not thread-safe: use one instance per search thread.
    """

    def __init__(self, task: GroundTask):
        self.task = task
        n_facts = task.n_facts
        consumers: list[list[int]] = [[] for _ in range(n_facts)]
        adders: list[list[int]] = [[] for _ in range(n_facts)]
        pre_counts: list[int] = []
        for aid, act in enumerate(task.actions):
            pre_counts.append(len(act.pre))
            for f in act.pre:
                consumers[f].append(aid)
            for f in act.add:
                adders[f].append(aid)
        self._consumers = consumers
        self._adders = [sorted(ads) for ads in adders]
        self._pre_counts = pre_counts
        self._zero_pre = [aid for aid, c in enumerate(pre_counts) if c == 0]
        self._goal = sorted(task.goal)
        self._goal_set = task.goal
        self._state_sid = state_schema_id(task.schema_table)
        self._goal_sid = goal_schema_id(task.schema_table)

    # -- relaxed planning graph ------------------------------------------

    def build_rpg(self, state: State) -> RelaxedPlanningGraph:
        task = self.task
        consumers = self._consumers
        fact_layer = [UNREACHED] * task.n_facts
        action_layer = [UNREACHED] * len(task.actions)
        remaining = self._pre_counts.copy()

        goals_left = 0
        for g in self._goal:
            if g not in state:
                goals_left += 1

        enabled: list[int] = []
        for aid in self._zero_pre:
            action_layer[aid] = 0
            enabled.append(aid)
        for f in state:
            fact_layer[f] = 0
            for aid in consumers[f]:
                remaining[aid] -= 1
                if remaining[aid] == 0:
                    action_layer[aid] = 0
                    enabled.append(aid)

        layer = 0
        actions = task.actions
        goal_set = self._goal_set
        while goals_left > 0:
            new_facts: list[int] = []
            for aid in enabled:
                for f in actions[aid].add:
                    if fact_layer[f] == UNREACHED:
                        fact_layer[f] = layer + 1
                        new_facts.append(f)
                        if f in goal_set:
                            goals_left -= 1
            if not new_facts:
                break
            layer += 1
            enabled = []
            for f in new_facts:
                for aid in consumers[f]:
                    remaining[aid] -= 1
                    if remaining[aid] == 0:
                        action_layer[aid] = layer
                        enabled.append(aid)

        return RelaxedPlanningGraph(fact_layer, action_layer, layer, goals_left == 0)

    # -- relaxed plan extraction -----------------------------------------

    def extract(self, state: State, rpg: RelaxedPlanningGraph) -> HeuristicReport:
        if not rpg.goals_reached:
            return HeuristicReport(None, None, frozenset())

        task = self.task
        fact_layer = rpg.fact_layer
        action_layer = rpg.action_layer
        adders = self._adders
        actions = task.actions

        unsat = [g for g in self._goal if fact_layer[g] > 0]
        max_layer = max((fact_layer[g] for g in self._goal), default=0)

        needed: list[set[int]] = [set() for _ in range(max_layer + 1)]
        for g in unsat:
            needed[fact_layer[g]].add(g)

        supporter: dict[int, int] = {}
        chosen: set[int] = set()
        for layer in range(max_layer, 0, -1):
            for f in sorted(needed[layer]):
                best = -1
                best_layer = UNREACHED
                for aid in adders[f]:
                    al = action_layer[aid]
                    if al < best_layer and al < layer:
                        best = aid
                        best_layer = al
                supporter[f] = best
                if best not in chosen:
                    chosen.add(best)
                    for p in actions[best].pre:
                        pl = fact_layer[p]
                        if pl > 0:
                            needed[pl].add(p)

        chosen_ids = sorted(chosen)
        vertex_of = {aid: i + 1 for i, aid in enumerate(chosen_ids)}
        state_v = 0
        goal_v = len(chosen_ids) + 1

        edges: set[tuple[int, int]] = set()
        for aid in chosen_ids:
            b = vertex_of[aid]
            pre = actions[aid].pre
            if not pre:
                edges.add((state_v, b))
            for p in pre:
                if fact_layer[p] == 0:
                    edges.add((state_v, b))
                else:
                    edges.add((vertex_of[supporter[p]], b))
        for g in unsat:
            edges.add((vertex_of[supporter[g]], goal_v))

        vertices = [DagVertex(STATE_VERTEX, None, self._state_sid, frozenset(), frozenset(state))]
        vertices.extend(
            DagVertex(ACTION_VERTEX, aid, actions[aid].schema_id, actions[aid].pre, actions[aid].add)
            for aid in chosen_ids
        )
        # the goal dummy consumes only the goals the extraction had to support;
        # goals already in the state get no support edge and no precondition
        vertices.append(DagVertex(GOAL_VERTEX, None, self._goal_sid, frozenset(unsat), frozenset()))

        dag = PlanDAG(
            vertices=tuple(vertices),
            edges=tuple(sorted(edges)),
            base_h=len(chosen_ids),
            layers=max_layer,
            unsat_goals=len(unsat),
        )
        preferred = frozenset(aid for aid in chosen_ids if action_layer[aid] == 0)
        return HeuristicReport(len(chosen_ids), dag, preferred)

    def evaluate(self, state: State) -> HeuristicReport:
        return self.extract(state, self.build_rpg(state))


def build_rpg(task: GroundTask, state: State) -> RelaxedPlanningGraph:
    return FFEvaluator(task).build_rpg(state)


def extract_relaxed_plan(task: GroundTask, state: State, rpg: RelaxedPlanningGraph) -> HeuristicReport:
    return FFEvaluator(task).extract(state, rpg)
