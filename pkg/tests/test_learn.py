from __future__ import annotations

import math
import random

import numpy as np
import pytest

import oracles
from rankplan import learn
from rankplan.errors import LayoutMismatch
from rankplan.features import FeatureLayout, FeatureVector
from rankplan.learn import (
    DegenerateGroup,
    EmptyGroup,
    GridPoint,
    LinearModel,
    ProblemGroup,
    SolverDiverged,
    TooFewGroups,
    TrainingSet,
    base_heuristic_model,
    fit_ranksvm,
    fit_ridge,
    kendall_tau,
    load_model,
    loocv_select,
    predict,
    ranksvm_objective,
    rmse,
    save_model,
)

SIG = "test-signature"


def group(xs, ys, pid="p") -> ProblemGroup:
    return ProblemGroup(pid, np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))


def ts_of(*groups) -> TrainingSet:
    return TrainingSet(tuple(groups), SIG)


def model_of(w, scale=1000) -> LinearModel:
    return LinearModel(np.asarray(w, dtype=float), SIG, scale=scale)


# ---------------------------------------------------------------------------
# metrics

def test_rmse_zero_on_exact_fit():
    ts = ts_of(group([[1], [2], [3]], [1, 2, 3]))
    assert rmse(ts, model_of([1])) == 0.0


def test_rmse_single_group_example():
    # residuals [3, 4] -> sqrt(12.5)
    ts = ts_of(group([[3], [8]], [0, 4]))
    assert rmse(ts, model_of([1])) == pytest.approx(math.sqrt(12.5), abs=1e-12)


def test_rmse_averages_group_scores():
    # one group with RMSE 1, another with RMSE 3 -> 2
    g1 = group([[1], [2]], [0, 1], "p1")   # residuals [1, 1]
    g2 = group([[3], [6]], [0, 3], "p2")   # residuals [3, 3]
    assert rmse(ts_of(g1, g2), model_of([1])) == pytest.approx(2.0)


def test_rmse_empty_training_set():
    with pytest.raises(EmptyGroup):
        rmse(TrainingSet((), SIG), model_of([1]))


def test_tau_monotone_agreement_and_reversal():
    ts = ts_of(group([[1], [2], [3]], [0, 1, 2]))
    assert kendall_tau(ts, model_of([1])) == 1.0
    assert kendall_tau(ts, model_of([-1])) == -1.0


def test_tau_tie_example():
    # y=[0,1,2], f=[5,5,9]: tie, +1, +1 -> 2/3
    ts = ts_of(group([[5], [5], [9]], [0, 1, 2]))
    assert kendall_tau(ts, model_of([1])) == pytest.approx(2 / 3, abs=1e-12)


def test_tau_group_average_cancels():
    up = group([[1], [2]], [0, 1], "p1")
    down = group([[2], [1]], [0, 1], "p2")
    assert kendall_tau(ts_of(up, down), model_of([1])) == 0.0


def test_tau_requires_pairs():
    with pytest.raises(DegenerateGroup):
        kendall_tau(ts_of(group([[1]], [0])), model_of([1]))


def test_tau_matches_pair_enumeration_oracle():
    rng = random.Random(3)
    for _ in range(200):
        groups = []
        data = []
        for gi in range(rng.randint(1, 6)):
            m = rng.randint(2, 30)
            ys = rng.sample(range(100), m)
            xs = [[rng.uniform(-5, 5)] for _ in range(m)]
            groups.append(group(xs, ys, f"p{gi}"))
            data.append(([x[0] for x in xs], ys))
        ours = kendall_tau(ts_of(*groups), model_of([1]))
        want = oracles.tau_oracle(data)
        assert ours == pytest.approx(want, abs=1e-12)


def test_tau_matches_inversion_count_with_distinct_predictions():
    rng = random.Random(9)
    for _ in range(100):
        m = rng.randint(2, 40)
        ys = rng.sample(range(1000), m)
        preds = rng.sample(range(1000), m)  # distinct
        ts = ts_of(group([[p] for p in preds], ys))
        ours = kendall_tau(ts, model_of([1]))
        assert ours == pytest.approx(oracles.tau_by_inversions(preds, ys), abs=1e-12)


def test_tau_invariant_under_monotone_transforms():
    rng = random.Random(4)
    for _ in range(50):
        groups = []
        for gi in range(rng.randint(1, 4)):
            m = rng.randint(2, 15)
            xs = [[rng.uniform(0.1, 5), rng.uniform(0.1, 5)] for _ in range(m)]
            groups.append(group(xs, rng.sample(range(50), m), f"p{gi}"))
        ts = ts_of(*groups)
        w = np.array([0.7, 1.3])
        base = lambda x: x @ w                    # positive predictions
        affine = lambda x: 2 * (x @ w) + 3
        cube = lambda x: (x @ w) ** 3
        t0 = kendall_tau(ts, base)
        assert kendall_tau(ts, affine) == pytest.approx(t0, abs=1e-12)
        assert kendall_tau(ts, cube) == pytest.approx(t0, abs=1e-12)


def test_tau_never_mixes_groups():
    rng = random.Random(6)
    g1 = group([[rng.random()] for _ in range(5)], [4, 0, 3, 1, 2], "p1")
    g2 = group([[rng.random()] for _ in range(5)], [1, 3, 0, 4, 2], "p2")
    t_before = kendall_tau(ts_of(g1, g2), model_of([1]))
    # shift one group's targets far away: within-group order unchanged
    g2b = group(g2.features, g2.targets + 1000, "p2")
    assert kendall_tau(ts_of(g1, g2b), model_of([1])) == pytest.approx(t_before, abs=1e-15)


def test_distinct_targets_enforced():
    with pytest.raises(DegenerateGroup):
        group([[1], [2]], [1, 1])


# ---------------------------------------------------------------------------
# ridge

def test_ridge_interpolates_identity():
    ts = ts_of(group(np.eye(2), [1, 2]))
    w = fit_ridge(ts, 1e-9).w
    assert np.abs(w - [1, 2]).max() < 1e-6


def test_ridge_closed_form_example():
    ts = ts_of(group([[1], [1]], [1, 3]))
    w = fit_ridge(ts, 2.0).w
    assert w[0] == pytest.approx(1.0, abs=1e-12)


def test_ridge_large_penalty_shrinks():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(30, 4))
    y = x @ np.array([1.0, -2.0, 0.5, 3.0]) + rng.normal(scale=0.01, size=30)
    y = y + np.arange(30) * 1e-6  # keep targets distinct
    ts = ts_of(group(x, y))
    ols = np.linalg.lstsq(x, y, rcond=None)[0]
    w = fit_ridge(ts, 1e9).w
    assert np.linalg.norm(w) < 1e-3 * np.linalg.norm(ols)


def test_ridge_matches_gradient_descent_oracle():
    rng = np.random.default_rng(1)
    for _ in range(25):
        n, d = int(rng.integers(8, 60)), int(rng.integers(1, 8))
        x = rng.normal(size=(n, d))
        y = rng.normal(size=n) + np.linspace(0, 1, n)  # distinct
        lam = float(10.0 ** rng.uniform(-1, 1))
        ts = ts_of(group(x, y))
        ours = fit_ridge(ts, lam).w
        want = oracles.ridge_gradient_descent(x, y, lam)
        assert np.abs(ours - want).max() < 1e-6


# ---------------------------------------------------------------------------
# RankSVM

def test_ranksvm_one_dim_margin():
    ts = ts_of(group([[0], [1], [2]], [0, 1, 2]))
    model = fit_ranksvm(ts, 100.0)
    assert model.w[0] == pytest.approx(1.0, abs=1e-3)
    assert kendall_tau(ts, model) == 1.0


def test_ranksvm_identical_features_zero_vector():
    ts = ts_of(group([[1, 2], [1, 2], [1, 2]], [0, 1, 2]))
    model = fit_ranksvm(ts, 10.0)
    assert np.abs(model.w).max() < 1e-9
    assert kendall_tau(ts, model) == 0.0


def planted_ranking_groups(rng, w_star, n_groups=4, m=12, min_gap=0.25):
    """Noiseless rankings from w_star with separated planted scores."""
    groups = []
    for gi in range(n_groups):
        rows, scores = [], []
        while len(rows) < m:
            x = rng.uniform(0, 4, size=len(w_star))
            s = float(x @ w_star)
            if all(abs(s - t) >= min_gap for t in scores):
                rows.append(x)
                scores.append(s)
        ys = np.argsort(np.argsort(scores))  # rank positions, distinct
        groups.append(group(np.array(rows), ys, f"p{gi}"))
    return groups


def test_ranksvm_planted_nonneg_model():
    rng = np.random.default_rng(5)
    ts = ts_of(*planted_ranking_groups(rng, np.array([2.0, 0.5])))
    model = fit_ranksvm(ts, 100.0, nonneg=True)
    assert (model.w >= 0).all()
    assert kendall_tau(ts, model) >= 0.99


def test_ranksvm_matches_qp_oracle():
    rng = np.random.default_rng(11)
    for trial in range(12):
        m = int(rng.integers(3, 9))
        d = int(rng.integers(1, 5))
        x = rng.normal(size=(m, d))
        ys = rng.permutation(m)
        c = float(10.0 ** rng.uniform(-2, 2))
        nonneg = bool(trial % 2)
        ts = ts_of(group(x, ys))
        model = fit_ranksvm(ts, c, nonneg=nonneg)
        diffs = learn._ranking_pairs(ts)
        ours = ranksvm_objective(model.w, diffs, c)
        w_star = oracles.ranksvm_qp_oracle(diffs, c, nonneg)
        best = ranksvm_objective(w_star, diffs, c)
        assert ours <= best * (1 + 1e-3) + 1e-9


def test_ranksvm_diverges_with_tiny_budget():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(20, 6))
    ts = ts_of(group(x, np.arange(20)))
    with pytest.raises(SolverDiverged):
        fit_ranksvm(ts, 100.0, max_sweeps=1, gap_tol=1e-12)


def test_ranksvm_group_locality():
    # constraints never cross problems: two groups with opposite global
    # offsets stay separable within groups
    g1 = group([[0], [1], [2]], [0, 1, 2], "p1")
    g2 = group([[100], [101], [102]], [0, 1, 2], "p2")
    model = fit_ranksvm(ts_of(g1, g2), 100.0)
    assert kendall_tau(ts_of(g1, g2), model) == 1.0


# ---------------------------------------------------------------------------
# prediction and scaling

def test_predict_zero_weights():
    layout = FeatureLayout.single(("a", "b"))
    model = LinearModel(np.zeros(layout.dimension), layout.signature)
    x = FeatureVector(np.ones(layout.dimension), layout.signature)
    assert predict(model, x) == 0


def test_predict_rounding_and_clamp():
    layout = FeatureLayout.single(("a",))
    w = np.zeros(layout.dimension)
    w[0] = 1.0
    model = LinearModel(w, layout.signature, scale=1000)
    x = FeatureVector(np.array([2.0004, 0, 0, 0]), layout.signature)
    assert predict(model, x) == 2000
    x_neg = FeatureVector(np.array([-3.0, 0, 0, 0]), layout.signature)
    assert predict(model, x_neg) == 0


def test_predict_layout_mismatch():
    layout = FeatureLayout.single(("a",))
    model = LinearModel(np.zeros(layout.dimension), layout.signature)
    with pytest.raises(LayoutMismatch):
        predict(model, FeatureVector(np.zeros(4), "other-sig"))


def test_base_heuristic_model_reads_base_slot():
    layout = FeatureLayout.single(("a", "b"))
    model = base_heuristic_model(layout)
    x = FeatureVector(np.array([5, 5, 7.0, 2, 1]), layout.signature)
    assert predict(model, x) == 7


# ---------------------------------------------------------------------------
# LOOCV

def _planted_ts(seed=0, n_groups=4, m=8, d=3, noise=0.0):
    rng = np.random.default_rng(seed)
    w_star = rng.uniform(0.5, 2, size=d)
    groups = []
    for gi in range(n_groups):
        x = rng.uniform(0, 3, size=(m, d))
        y = x @ w_star + rng.normal(scale=noise, size=m)
        y = y + np.linspace(0, 1e-6, m)  # force distinct
        groups.append(group(x, y, f"p{gi}"))
    return ts_of(*groups)


def test_loocv_needs_two_groups():
    with pytest.raises(TooFewGroups):
        loocv_select(ts_of(group([[1], [2]], [0, 1])), "ridge")


def test_loocv_grid_of_one():
    sel = loocv_select(_planted_ts(), "ridge", grid=[0.5])
    assert sel.best_param == 0.5
    assert len(sel.grid) == 1


def test_loocv_ridge_prefers_tiny_lambda_on_noiseless_data():
    sel = loocv_select(_planted_ts(noise=0.0), "ridge", grid=[1e-9, 1e9])
    assert sel.best_param == 1e-9
    assert sel.cv_rmse < 1e-4


def test_loocv_ridge_tie_prefers_stronger_regularization(monkeypatch):
    scripted = iter([(1.0, 0.5), (1.0, 0.5), (2.0, 0.4)])
    monkeypatch.setattr(learn, "_fold_scores", lambda ts, fit: next(scripted))
    sel = loocv_select(_planted_ts(), "ridge", grid=[0.1, 1.0, 10.0])
    assert sel.best_param == 1.0  # tie between 0.1 and 1.0 -> larger lambda


def test_loocv_ranksvm_stops_at_first_decrease(monkeypatch):
    scripted = iter([(1.0, 0.50), (1.0, 0.70), (1.0, 0.65), (1.0, 0.99)])
    monkeypatch.setattr(learn, "_fold_scores", lambda ts, fit: next(scripted))
    sel = loocv_select(_planted_ts(), "ranksvm", grid=[1e-3, 1e-2, 1e-1, 1.0])
    assert sel.best_param == 1e-2          # the peak, not the grid end
    assert len(sel.grid) == 3              # stopped before evaluating 1.0
    assert sel.cv_tau == 0.70


def test_loocv_ranksvm_tie_keeps_smaller_c(monkeypatch):
    scripted = iter([(1.0, 0.7), (1.0, 0.7), (1.0, 0.2)])
    monkeypatch.setattr(learn, "_fold_scores", lambda ts, fit: next(scripted))
    sel = loocv_select(_planted_ts(), "ranksvm", grid=[1e-3, 1e-2, 1e-1])
    assert sel.best_param == 1e-3


def test_loocv_reports_both_metrics():
    sel = loocv_select(_planted_ts(noise=0.05), "ranksvm", grid=[0.1, 1.0])
    assert -1 <= sel.cv_tau <= 1
    assert sel.cv_rmse >= 0
    assert sel.model.method == "ranksvm"


# ---------------------------------------------------------------------------
# model files

def test_model_file_round_trip_bit_exact(tmp_path):
    layout = FeatureLayout.pairwise(("move", "pick", "drop"))
    rng = np.random.default_rng(8)
    w = rng.normal(size=layout.dimension) * np.pi
    model = LinearModel(w, layout.signature, scale=1000, method="ranksvm",
                        param=0.1, nonneg=False)
    path = tmp_path / "model.txt"
    save_model(model, layout, path)
    loaded, loaded_layout = load_model(path)
    assert loaded_layout == layout
    assert loaded.w.tolist() == w.tolist()          # bit-exact weights
    assert (loaded.scale, loaded.method, loaded.param, loaded.nonneg) == \
        (1000, "ranksvm", 0.1, False)
    x = FeatureVector(rng.normal(size=layout.dimension) ** 2, layout.signature)
    assert predict(loaded, x) == predict(model, x)  # identical predictions


def test_model_file_header_checked(tmp_path):
    path = tmp_path / "bogus.txt"
    path.write_text("not a model\n")
    with pytest.raises(Exception, match="not a rankplan model"):
        load_model(path)


def test_model_file_grid_point_fields():
    pt = GridPoint(0.1, 1.0, 0.5)
    assert (pt.param, pt.cv_rmse, pt.cv_tau) == (0.1, 1.0, 0.5)
