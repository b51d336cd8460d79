"""Linear heuristic learners: ridge regression and a primal RankSVM.

Scores are the per-problem averaged RMSE and Kendall rank correlation; the
grouping is load-bearing, since rankings are never scored across problems.
The RankSVM is solved in the dual by coordinate ascent with a duality-gap
stopping rule; the non-negativity variant keeps ``w >= 0`` as a solver
constraint via an extra multiplier block, not by clipping afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import LayoutMismatch, RankplanError
from .features import FeatureLayout, FeatureVector

DEFAULT_SCALE = 1000
DEFAULT_LAMBDA_GRID = tuple(10.0 ** e for e in range(-4, 5))
DEFAULT_C_GRID = tuple(10.0 ** e for e in range(-4, 3))


class EmptyGroup(RankplanError):
    pass


class DegenerateGroup(RankplanError):
    pass


class SolverDiverged(RankplanError):
    pass


class TooFewGroups(RankplanError):
    pass


# ---------------------------------------------------------------------------
# training data

@dataclass(frozen=True)
class ProblemGroup:
    problem_id: str
    features: np.ndarray   # (m, d)
    targets: np.ndarray    # (m,) distances-to-go

    def __post_init__(self):
        if self.features.ndim != 2 or len(self.features) != len(self.targets):
            raise EmptyGroup(f"group '{self.problem_id}': malformed feature matrix")
        if len(self.targets) == 0:
            raise EmptyGroup(f"group '{self.problem_id}' has no examples")
        if len(set(self.targets.tolist())) != len(self.targets):
            raise DegenerateGroup(f"group '{self.problem_id}' has duplicate target values")

    @property
    def size(self) -> int:
        return len(self.targets)


@dataclass(frozen=True)
class TrainingSet:
    groups: tuple[ProblemGroup, ...]
    signature: str

    @staticmethod
    def build(groups: Iterable[tuple[str, Sequence[FeatureVector], Sequence[int]]]) -> "TrainingSet":
        """Assemble from (problem_id, vectors, targets) triples."""
        out: list[ProblemGroup] = []
        signature = None
        for problem_id, vecs, ys in groups:
            for v in vecs:
                if signature is None:
                    signature = v.signature
                elif v.signature != signature:
                    raise LayoutMismatch("training examples mix feature layouts")
            out.append(ProblemGroup(
                problem_id,
                np.array([v.values for v in vecs], dtype=float),
                np.array(ys, dtype=float),
            ))
        if signature is None:
            raise EmptyGroup("no training examples")
        return TrainingSet(tuple(out), signature)

    @property
    def dimension(self) -> int:
        return self.groups[0].features.shape[1]

    def subset(self, indices: Sequence[int]) -> "TrainingSet":
        return TrainingSet(tuple(self.groups[i] for i in indices), self.signature)

    def pooled(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.vstack([g.features for g in self.groups])
        y = np.concatenate([g.targets for g in self.groups])
        return x, y


@dataclass(frozen=True)
class LinearModel:
    w: np.ndarray
    signature: str
    scale: int = DEFAULT_SCALE
    method: str = "none"
    param: float | None = None
    nonneg: bool = False

    def __post_init__(self):
        self.w.setflags(write=False)

    def raw(self, x: np.ndarray) -> np.ndarray:
        return x @ self.w


Predictor = Callable[[np.ndarray], np.ndarray]


def _predictions(model: "LinearModel | Predictor", x: np.ndarray) -> np.ndarray:
    if isinstance(model, LinearModel):
        return x @ model.w
    return np.asarray(model(x), dtype=float)


def predict(model: LinearModel, x: FeatureVector) -> int:
    """Integerized heuristic value: round(scale * max(0, w.x))."""
    if x.signature != model.signature:
        raise LayoutMismatch("feature vector layout does not match the model")
    raw = float(x.values @ model.w)
    return int(math.floor(model.scale * max(0.0, raw) + 0.5))


def base_heuristic_model(layout: FeatureLayout) -> LinearModel:
    """Unit weight on the base-heuristic slot: reproduces the base ordering."""
    w = np.zeros(layout.dimension)
    w[-3] = 1.0
    return LinearModel(w, layout.signature, scale=1, method="base")


# ---------------------------------------------------------------------------
# metrics

def rmse(ts: TrainingSet, model: "LinearModel | Predictor") -> float:
    """Per-problem RMSE, averaged over problems."""
    if not ts.groups:
        raise EmptyGroup("training set has no groups")
    total = 0.0
    for g in ts.groups:
        resid = _predictions(model, g.features) - g.targets
        total += math.sqrt(float(np.mean(resid * resid)))
    return total / len(ts.groups)


def kendall_tau(ts: TrainingSet, model: "LinearModel | Predictor") -> float:
    """Per-problem Kendall rank correlation, averaged over problems.

    Pairs are scored within a problem only: +1 when the prediction orders a
    pair like the targets do, -1 when it reverses it, 0 on predicted ties.
    """
    if not ts.groups:
        raise EmptyGroup("training set has no groups")
    total = 0.0
    for g in ts.groups:
        m = g.size
        if m < 2:
            raise DegenerateGroup(f"group '{g.problem_id}' has fewer than 2 examples")
        f = _predictions(model, g.features)
        df = np.sign(f[:, None] - f[None, :])
        dy = np.sign(g.targets[:, None] - g.targets[None, :])
        s = np.where(df == 0, 0.0, np.where(df == dy, 1.0, -1.0))
        upper = np.triu_indices(m, k=1)
        total += 2.0 / (m * (m - 1)) * float(s[upper].sum())
    return total / len(ts.groups)


# ---------------------------------------------------------------------------
# ridge regression

def fit_ridge(ts: TrainingSet, lam: float, scale: int = DEFAULT_SCALE) -> LinearModel:
    """Closed-form ridge fit over all examples pooled across groups."""
    if lam <= 0:
        raise RankplanError("ridge penalty must be positive")
    x, y = ts.pooled()
    d = x.shape[1]
    w = np.linalg.solve(x.T @ x + lam * np.eye(d), x.T @ y)
    return LinearModel(w, ts.signature, scale=scale, method="ridge", param=lam)


# ---------------------------------------------------------------------------
# RankSVM

def _ranking_pairs(ts: TrainingSet) -> np.ndarray:
    """Difference rows, one per within-group pair, oriented higher-minus-lower."""
    rows = []
    for g in ts.groups:
        if g.size < 2:
            raise DegenerateGroup(f"group '{g.problem_id}' has fewer than 2 examples")
        order = np.argsort(-g.targets, kind="stable")
        x = g.features[order]
        for j in range(len(order)):
            for k in range(j + 1, len(order)):
                rows.append(x[j] - x[k])
    return np.array(rows)


def ranksvm_objective(w: np.ndarray, diffs: np.ndarray, c: float) -> float:
    slack = np.maximum(0.0, 1.0 - diffs @ w)
    return float(w @ w + c * slack.sum())


def fit_ranksvm(
    ts: TrainingSet,
    c: float,
    nonneg: bool = False,
    scale: int = DEFAULT_SCALE,
    gap_tol: float = 1e-4,
    max_sweeps: int = 50000,
) -> LinearModel:
    """Primal RankSVM: min ||w||^2 + C * sum(slack) over within-group pairs.

    Solved by dual coordinate ascent; terminates when the duality gap drops
    below ``gap_tol * (1 + |primal|)``, which certifies the objective is
    within that factor of any optimum.  Raises SolverDiverged if the sweep
    cap is hit first.
    """
    if c <= 0:
        raise RankplanError("RankSVM penalty C must be positive")
    diffs = _ranking_pairs(ts)
    w = _solve_ranksvm_dual(diffs, c, nonneg, gap_tol, max_sweeps)
    return LinearModel(w, ts.signature, scale=scale, method="ranksvm", param=c, nonneg=nonneg)


def _solve_ranksvm_dual(
    diffs: np.ndarray, c: float, nonneg: bool, gap_tol: float, max_sweeps: int
) -> np.ndarray:
    """Dual coordinate ascent; w = 0.5 * D^T alpha, truncated to the
    non-negative orthant when the w >= 0 multipliers are active.  The
    multiplier block has a closed-form optimum and is refreshed after every
    coordinate step, keeping the ascent monotone."""
    n_pairs, dim = diffs.shape
    alpha = np.zeros(n_pairs)
    u = np.zeros(dim)            # D^T alpha
    w = np.zeros(dim)
    qii = np.einsum("ij,ij->i", diffs, diffs)
    rng = np.random.default_rng(0)

    for sweep in range(max_sweeps):
        for p in rng.permutation(n_pairs):
            row = diffs[p]
            grad = 1.0 - row @ w
            if qii[p] <= 0.0:
                new = c if grad > 0 else alpha[p]
            else:
                new = min(max(alpha[p] + grad / (0.5 * qii[p]), 0.0), c)
            delta = new - alpha[p]
            if delta != 0.0:
                alpha[p] = new
                u += delta * row
                if nonneg:
                    np.maximum(u, 0.0, out=w)
                    w *= 0.5
                else:
                    w += (0.5 * delta) * row
        primal = ranksvm_objective(w, diffs, c)
        dual = float(alpha.sum()) - float(w @ w)
        if primal - dual <= gap_tol * (1.0 + abs(primal)):
            return w
    raise SolverDiverged(
        f"RankSVM did not close the duality gap within {max_sweeps} sweeps"
    )


# ---------------------------------------------------------------------------
# leave-one-out cross-validation

@dataclass(frozen=True)
class GridPoint:
    param: float
    cv_rmse: float
    cv_tau: float


@dataclass(frozen=True)
class SelectionResult:
    method: str
    best_param: float
    cv_score: float            # selection metric at best_param
    cv_rmse: float
    cv_tau: float
    model: LinearModel
    grid: tuple[GridPoint, ...]


def _fold_scores(ts: TrainingSet, fit: Callable[[TrainingSet], LinearModel]) -> tuple[float, float]:
    """Average held-out (rmse, tau) over all leave-one-group-out folds."""
    n = len(ts.groups)
    rmses, taus = [], []
    for held in range(n):
        train = ts.subset([i for i in range(n) if i != held])
        test = ts.subset([held])
        model = fit(train)
        rmses.append(rmse(test, model))
        taus.append(kendall_tau(test, model))
    return float(np.mean(rmses)), float(np.mean(taus))


def loocv_select(
    ts: TrainingSet,
    method: str,
    nonneg: bool = False,
    grid: Sequence[float] | None = None,
    scale: int = DEFAULT_SCALE,
) -> SelectionResult:
    """Pick the regularization parameter by leave-one-problem-out CV.

    Ridge scans the whole grid for the lowest cv-RMSE; RankSVM walks the
    grid from the most regularized end (smallest C) and stops at the first
    drop in cv-tau.  Ties keep the stronger regularization.  The returned
    model is retrained on all groups at the chosen parameter.
    """
    if len(ts.groups) < 2:
        raise TooFewGroups("leave-one-out selection needs at least 2 problem groups")
    if method == "ridge":
        grid = tuple(grid) if grid is not None else DEFAULT_LAMBDA_GRID
    elif method == "ranksvm":
        grid = tuple(grid) if grid is not None else DEFAULT_C_GRID
    else:
        raise RankplanError(f"unknown learner '{method}'")
    if not grid or list(grid) != sorted(grid):
        raise RankplanError("parameter grid must be nonempty and ascending")

    points: list[GridPoint] = []
    best_idx = 0
    if method == "ridge":
        for param in grid:
            r, t = _fold_scores(ts, lambda tr: fit_ridge(tr, param, scale))
            points.append(GridPoint(param, r, t))
        for i, pt in enumerate(points):
            # <= prefers the later (larger, more regularized) lambda on ties
            if pt.cv_rmse <= points[best_idx].cv_rmse:
                best_idx = i
        final = fit_ridge(ts, points[best_idx].param, scale)
        score = points[best_idx].cv_rmse
    else:
        for param in grid:
            r, t = _fold_scores(ts, lambda tr: fit_ranksvm(tr, param, nonneg, scale))
            points.append(GridPoint(param, r, t))
            if t > points[best_idx].cv_tau:
                best_idx = len(points) - 1
            elif t < points[best_idx].cv_tau:
                break  # first decrease past the best: stop the line search
        final = fit_ranksvm(ts, points[best_idx].param, nonneg, scale)
        score = points[best_idx].cv_tau

    best = points[best_idx]
    return SelectionResult(method, best.param, score, best.cv_rmse, best.cv_tau, final, tuple(points))


# ---------------------------------------------------------------------------
# model files

MODEL_HEADER = "rankplan-model v1"


def save_model(model: LinearModel, layout: FeatureLayout, path) -> None:
    if model.signature != layout.signature:
        raise LayoutMismatch("model does not match the layout being saved")
    lines = [
        MODEL_HEADER,
        f"method {model.method}",
        f"param {'none' if model.param is None else repr(model.param)}",
        f"nonneg {int(model.nonneg)}",
        f"scale {model.scale}",
        f"layout {layout.kind}",
        "schemas " + " ".join(layout.schema_table),
    ]
    lines.extend(f"{label} {repr(float(v))}" for label, v in zip(layout.labels, model.w))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> tuple[LinearModel, FeatureLayout]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != MODEL_HEADER:
        raise RankplanError(f"{path}: not a rankplan model file")

    def take(idx: int, key: str) -> str:
        if idx >= len(lines) or not lines[idx].startswith(key + " "):
            raise RankplanError(f"{path}: expected '{key}' on line {idx + 1}")
        return lines[idx][len(key) + 1:]

    method = take(1, "method")
    param_s = take(2, "param")
    nonneg = bool(int(take(3, "nonneg")))
    scale = int(take(4, "scale"))
    kind = take(5, "layout")
    schemas = tuple(take(6, "schemas").split())
    layout = FeatureLayout.make(kind, schemas)
    if len(lines) < 7 + layout.dimension:
        raise RankplanError(f"{path}: fewer weight lines than the layout's slots")
    w = np.zeros(layout.dimension)
    for i in range(layout.dimension):
        label, _, value = lines[7 + i].partition(" ")
        if label != layout.labels[i]:
            raise RankplanError(f"{path}: slot {i} is '{label}', expected '{layout.labels[i]}'")
        w[i] = float(value)
    model = LinearModel(
        w, layout.signature, scale=scale, method=method,
        param=None if param_s == "none" else float(param_s), nonneg=nonneg,
    )
    return model, layout
