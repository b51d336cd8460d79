"""Schema instantiation and STRIPS state-transition semantics.

Produces an immutable GroundTask from parsed domain/problem definitions.
States are plain ``frozenset`` values of fact ids; a plan is a list of
ground-action ids.  Fact and action ids are assigned in lexicographic order
of (schema name, argument names) so identical inputs always ground to
identical id assignments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

from .errors import RankplanError
from .pddl import ROOT_TYPE, DomainDef, ProblemDef

Atom = tuple[str, tuple[str, ...]]
State = frozenset[int]

DEFAULT_ACTION_CAP = 10**7


class GroundingExplosion(RankplanError):
    pass


class NotApplicable(RankplanError):
    pass


@dataclass(frozen=True)
class GroundAction:
    name: str                 # schema name
    args: tuple[str, ...]
    schema_id: int
    pre: frozenset[int]
    add: frozenset[int]
    delete: frozenset[int]

    def label(self) -> str:
        return "(" + " ".join((self.name,) + self.args) + ")"


@dataclass(frozen=True)
class GroundTask:
    facts: tuple[Atom, ...]
    actions: tuple[GroundAction, ...]
    init: State
    goal: frozenset[int]
    schema_table: tuple[str, ...]       # domain declaration order
    trivially_unsolvable: bool = False
    fact_ids: dict[Atom, int] = field(default_factory=dict, compare=False, repr=False)

    @property
    def n_facts(self) -> int:
        return len(self.facts)

    def fact_label(self, fid: int) -> str:
        pred, args = self.facts[fid]
        return "(" + " ".join((pred,) + args) + ")"

    def action_id(self, name: str, args: tuple[str, ...]) -> int:
        key = (name, args)
        idx = self._action_ids.get(key)
        if idx is None:
            raise RankplanError(f"unknown ground action ({name} {' '.join(args)})")
        return idx

    def __post_init__(self):
        object.__setattr__(
            self, "_action_ids", {(a.name, a.args): i for i, a in enumerate(self.actions)}
        )


# ---------------------------------------------------------------------------
# grounding

def ground(dom: DomainDef, prob: ProblemDef, max_ground_actions: int = DEFAULT_ACTION_CAP) -> GroundTask:
    """Instantiate all schemas over the problem's objects.

    Pruning: (a) candidates whose static preconditions are not in init are
    dropped; (b) facts unreachable under the delete relaxation are dropped,
    along with every action whose preconditions mention one.  Unreachable
    goal facts are kept in the universe and flag the task trivially
    unsolvable.
    """
    objs_by_type = _objects_by_type(dom, prob)

    static_preds = {p.name for p in dom.predicates}
    for a in dom.actions:
        for pname, _ in a.add | a.delete:
            static_preds.discard(pname)

    init_atoms = set(prob.init)

    # candidate count check before enumeration
    total = 0
    for schema in dom.actions:
        count = 1
        for _, typ in schema.params:
            count *= len(objs_by_type.get(typ, ()))
        total += count
        if total > max_ground_actions:
            raise GroundingExplosion(
                f"candidate ground actions exceed cap ({total} > {max_ground_actions})"
            )

    candidates: list[tuple[str, tuple[str, ...], set[Atom], set[Atom], set[Atom], int]] = []
    for schema_id, schema in enumerate(dom.actions):
        domains = [objs_by_type.get(typ, ()) for _, typ in schema.params]
        var_index = {var: i for i, (var, _) in enumerate(schema.params)}
        for binding in product(*domains):
            pre = {_instantiate(atom, var_index, binding) for atom in schema.pre}
            if any(a[0] in static_preds and a not in init_atoms for a in pre):
                continue
            add = {_instantiate(atom, var_index, binding) for atom in schema.add}
            delete = {_instantiate(atom, var_index, binding) for atom in schema.delete}
            candidates.append((schema.name, binding, pre, add, delete, schema_id))

    # delete-relaxed reachability fixpoint over candidate actions
    reachable = set(init_atoms)
    pending = list(range(len(candidates)))
    changed = True
    applied: set[int] = set()
    while changed:
        changed = False
        still = []
        for idx in pending:
            pre = candidates[idx][2]
            if pre <= reachable:
                applied.add(idx)
                add = candidates[idx][3]
                if not add <= reachable:
                    reachable |= add
                    changed = True
            else:
                still.append(idx)
        pending = still

    goal_atoms = set(prob.goal)
    trivially_unsolvable = not goal_atoms <= reachable

    universe = reachable | goal_atoms
    fact_list = sorted(universe)
    fact_ids = {atom: i for i, atom in enumerate(fact_list)}

    kept = []
    for idx in sorted(applied):
        name, args, pre, add, delete, schema_id = candidates[idx]
        kept.append(GroundAction(
            name=name,
            args=args,
            schema_id=schema_id,
            pre=frozenset(fact_ids[a] for a in pre),
            add=frozenset(fact_ids[a] for a in add),
            # deleting a never-true fact is a no-op; drop it
            delete=frozenset(fact_ids[a] for a in delete if a in universe),
        ))
    kept.sort(key=lambda ga: (ga.name, ga.args))

    return GroundTask(
        facts=tuple(fact_list),
        actions=tuple(kept),
        init=frozenset(fact_ids[a] for a in init_atoms),
        goal=frozenset(fact_ids[a] for a in goal_atoms),
        schema_table=tuple(a.name for a in dom.actions),
        trivially_unsolvable=trivially_unsolvable,
        fact_ids=fact_ids,
    )


def _objects_by_type(dom: DomainDef, prob: ProblemDef) -> dict[str, tuple[str, ...]]:
    by_type: dict[str, list[str]] = {t: [] for t in dom.types}
    by_type.setdefault(ROOT_TYPE, [])
    for oname, otype in prob.objects:
        t = otype
        seen = set()
        while t not in seen:
            by_type.setdefault(t, []).append(oname)
            seen.add(t)
            if t == ROOT_TYPE:
                break
            t = dom.types.get(t, ROOT_TYPE)
    return {t: tuple(sorted(objs)) for t, objs in by_type.items()}


def _instantiate(atom: Atom, var_index: dict[str, int], binding: tuple[str, ...]) -> Atom:
    pred, args = atom
    return pred, tuple(binding[var_index[a]] if a.startswith("?") else a for a in args)


def make_task(
    actions: list[tuple[str, tuple[str, ...], set[str], set[str], set[str]]],
    init: set[str],
    goal: set[str],
    schema_table: list[str] | None = None,
    extra_facts: set[str] | None = None,
) -> GroundTask:
    """Build a GroundTask directly from string-labelled facts (test helper).

    `actions` entries are (schema_name, args, pre, add, delete); facts are
    arbitrary string labels.  Ids follow the same lexicographic rule as
    ground().
    """
    universe: set[str] = set(init) | set(goal) | (extra_facts or set())
    for _, _, pre, add, delete in actions:
        universe |= pre | add | delete
    fact_list = tuple((f, ()) for f in sorted(universe))
    fact_ids = {f: i for i, (f, _) in enumerate(fact_list)}
    if schema_table is None:
        schema_table = sorted({name for name, *_ in actions})
    schema_index = {name: i for i, name in enumerate(schema_table)}
    ground_actions = sorted(
        (GroundAction(
            name=name,
            args=args,
            schema_id=schema_index[name],
            pre=frozenset(fact_ids[f] for f in pre),
            add=frozenset(fact_ids[f] for f in add),
            delete=frozenset(fact_ids[f] for f in delete),
        ) for name, args, pre, add, delete in actions),
        key=lambda ga: (ga.name, ga.args),
    )
    return GroundTask(
        facts=fact_list,
        actions=tuple(ground_actions),
        init=frozenset(fact_ids[f] for f in init),
        goal=frozenset(fact_ids[f] for f in goal),
        schema_table=tuple(schema_table),
        trivially_unsolvable=False,
        fact_ids={(f, ()): i for f, i in fact_ids.items()},
    )


# ---------------------------------------------------------------------------
# transition semantics

def applicable(task: GroundTask, state: State) -> list[int]:
    """Ids of actions whose preconditions hold in `state`, ascending."""
    return [i for i, a in enumerate(task.actions) if a.pre <= state]


def apply(task: GroundTask, state: State, action_id: int) -> State:
    a = task.actions[action_id]
    if not a.pre <= state:
        missing = next(iter(a.pre - state))
        raise NotApplicable(f"{a.label()}: precondition {task.fact_label(missing)} not satisfied")
    return (state - a.delete) | a.add


@dataclass(frozen=True)
class ValidationResult:
    valid: bool
    end_state: State
    length: int
    failed_step: int | None = None


def validate(task: GroundTask, start: State, plan: list[int]) -> ValidationResult:
    """Check sequential applicability and goal satisfaction; never raises."""
    state = start
    for i, aid in enumerate(plan):
        a = task.actions[aid]
        if not a.pre <= state:
            return ValidationResult(False, state, i, failed_step=i)
        state = (state - a.delete) | a.add
    if not task.goal <= state:
        return ValidationResult(False, state, len(plan), failed_step=None)
    return ValidationResult(True, state, len(plan))


# ---------------------------------------------------------------------------
# plan files (IPC convention: one parenthesized action per line)

def format_plan(task: GroundTask, plan: list[int]) -> str:
    return "".join(task.actions[aid].label() + "\n" for aid in plan)


def parse_plan(text: str, task: GroundTask) -> list[int]:
    plan: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(";"):
            continue
        if not (line.startswith("(") and line.endswith(")")):
            raise RankplanError(f"plan line {lineno}: expected (name args...)")
        parts = line[1:-1].split()
        if not parts:
            raise RankplanError(f"plan line {lineno}: empty action")
        plan.append(task.action_id(parts[0].lower(), tuple(p.lower() for p in parts[1:])))
    return plan
