"""Feature mappings from relaxed-plan DAGs to fixed-layout count vectors.

Two layouts: per-schema action counts ("single") and ordered schema-pair
interaction counts ("pairwise").  Both append the same three extras:
the base heuristic value, the DAG layer depth, and the unsatisfied-goal
count.  Layouts are derived from the domain's schema table plus two
sentinel roles for the state and goal dummies, so the slot order is stable
across runs and problems of the same domain.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import LayoutMismatch, RankplanError
from .ff import ACTION_VERTEX, PlanDAG

SINGLE = "single"
PAIRWISE = "pairwise"

STATE_ROLE = "@state"
GOAL_ROLE = "@goal"

EXTRA_LABELS = ("base_h", "layers", "unsat_goals")


class CycleDetected(RankplanError):
    """The supposed DAG has a cycle; signals a heuristic-backend bug."""


@dataclass(frozen=True)
class FeatureLayout:
    kind: str
    schema_table: tuple[str, ...]   # real schemas; sentinel roles appended in `roles`
    labels: tuple[str, ...]
    signature: str

    @property
    def roles(self) -> tuple[str, ...]:
        return self.schema_table + (STATE_ROLE, GOAL_ROLE)

    @property
    def dimension(self) -> int:
        return len(self.labels)

    @staticmethod
    def make(kind: str, schema_table: tuple[str, ...]) -> "FeatureLayout":
        if kind == SINGLE:
            labels = tuple(f"n({s})" for s in schema_table) + EXTRA_LABELS
        elif kind == PAIRWISE:
            roles = schema_table + (STATE_ROLE, GOAL_ROLE)
            pair_labels: list[str] = []
            for s1 in roles:
                for s2 in roles:
                    pair_labels.append(f"fwd({s1},{s2})")
                    pair_labels.append(f"back({s1},{s2})")
            labels = tuple(pair_labels) + EXTRA_LABELS
        else:
            raise LayoutMismatch(f"unknown layout kind '{kind}'")
        digest = hashlib.sha256(("\x1f".join((kind,) + schema_table)).encode()).hexdigest()[:16]
        return FeatureLayout(kind, schema_table, labels, digest)

    @staticmethod
    def single(schema_table: tuple[str, ...]) -> "FeatureLayout":
        return FeatureLayout.make(SINGLE, schema_table)

    @staticmethod
    def pairwise(schema_table: tuple[str, ...]) -> "FeatureLayout":
        return FeatureLayout.make(PAIRWISE, schema_table)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    signature: str

    def __post_init__(self):
        self.values.setflags(write=False)


# ---------------------------------------------------------------------------

def single_features(dag: PlanDAG, layout: FeatureLayout) -> FeatureVector:
    """Count action vertices per schema; append the three extras."""
    if layout.kind != SINGLE:
        raise LayoutMismatch(f"expected a '{SINGLE}' layout, got '{layout.kind}'")
    vals = np.zeros(layout.dimension)
    for v in dag.vertices:
        if v.kind == ACTION_VERTEX:
            if v.schema_id >= len(layout.schema_table):
                raise LayoutMismatch("DAG schema id outside layout's schema table")
            vals[v.schema_id] += 1
    vals[-3:] = (dag.base_h, dag.layers, dag.unsat_goals)
    return FeatureVector(vals, layout.signature)


def _descendant_bits(dag: PlanDAG) -> list[int]:
    """Bitmask per vertex of all vertices reachable by a path of length >= 1."""
    n = len(dag.vertices)
    adj: list[list[int]] = [[] for _ in range(n)]
    indeg = [0] * n
    for u, v in dag.edges:
        adj[u].append(v)
        indeg[v] += 1
    stack = [v for v in range(n) if indeg[v] == 0]
    topo: list[int] = []
    while stack:
        v = stack.pop()
        topo.append(v)
        for w in adj[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                stack.append(w)
    if len(topo) != n:
        raise CycleDetected("cycle in plan DAG")
    desc = [0] * n
    for v in reversed(topo):
        bits = 0
        for w in adj[v]:
            bits |= desc[w] | (1 << w)
        desc[v] = bits
    return desc


def reachability(dag: PlanDAG) -> list[set[int]]:
    """Descendant sets: w in result[v] iff a directed path v -> w exists."""
    out: list[set[int]] = []
    for bits in _descendant_bits(dag):
        members = set()
        while bits:
            low = bits & -bits
            members.add(low.bit_length() - 1)
            bits ^= low
        out.append(members)
    return out


def pairwise_features(dag: PlanDAG, layout: FeatureLayout,
                      explicit_only: bool = False) -> FeatureVector:
    """Count ordered vertex pairs (v1 before v2) with overlapping sets.

    For each pair with v2 a descendant of v1, the forward slot counts
    eff(v1) meeting pre(v2); the back slot counts eff(v2) meeting pre(v1).
    With `explicit_only` the pair relation shrinks to direct support edges
    instead of the full descendant order.
    """
    if layout.kind != PAIRWISE:
        raise LayoutMismatch(f"expected a '{PAIRWISE}' layout, got '{layout.kind}'")
    n_roles = len(layout.roles)
    vals = np.zeros(layout.dimension)
    if explicit_only:
        _descendant_bits(dag)  # still reject cyclic inputs
        desc = [0] * len(dag.vertices)
        for u, v in dag.edges:
            desc[u] |= 1 << v
    else:
        desc = _descendant_bits(dag)
    verts = dag.vertices
    for i1, v1 in enumerate(verts):
        if v1.schema_id >= n_roles:
            raise LayoutMismatch("DAG schema id outside layout's roles")
        bits = desc[i1]
        eff1, pre1 = v1.eff, v1.pre
        base1 = v1.schema_id * n_roles
        while bits:
            low = bits & -bits
            i2 = low.bit_length() - 1
            bits ^= low
            v2 = verts[i2]
            slot = 2 * (base1 + v2.schema_id)
            if not eff1.isdisjoint(v2.pre):
                vals[slot] += 1
            if not v2.eff.isdisjoint(pre1):
                vals[slot + 1] += 1
    vals[-3:] = (dag.base_h, dag.layers, dag.unsat_goals)
    return FeatureVector(vals, layout.signature)


def featurize(dag: PlanDAG, layout: FeatureLayout) -> FeatureVector:
    if layout.kind == SINGLE:
        return single_features(dag, layout)
    return pairwise_features(dag, layout)


# ---------------------------------------------------------------------------
# feature matrix dump (debugging / offline learning)

def write_feature_csv(path, layout: FeatureLayout, rows) -> None:
    """Write examples as CSV: slot labels, then `y` and `problem-id` columns.

    `rows` yields (FeatureVector, y, problem_id) triples.
    """
    with open(path, "w") as fh:
        fh.write(",".join(layout.labels + ("y", "problem-id")) + "\n")
        for vec, y, problem_id in rows:
            if vec.signature != layout.signature:
                raise LayoutMismatch("feature vector does not match the layout being dumped")
            cells = [repr(float(v)) for v in vec.values]
            fh.write(",".join(cells + [repr(int(y)), str(problem_id)]) + "\n")


def read_feature_csv(path, layout: FeatureLayout):
    """Read a dump back into (FeatureVector, y, problem_id) triples."""
    out = []
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        if tuple(header) != layout.labels + ("y", "problem-id"):
            raise LayoutMismatch(f"{path}: header does not match layout")
        for line in fh:
            cells = line.rstrip("\n").split(",")
            vals = np.array([float(c) for c in cells[:-2]])
            out.append((FeatureVector(vals, layout.signature), int(cells[-2]), cells[-1]))
    return out
