from __future__ import annotations

import numpy as np
import pytest

from rankplan.features import FeatureLayout
from rankplan.generators import GenSpec, generate_instance
from rankplan.grounding import ground, make_task, validate
from rankplan.pipeline import (
    InvalidInputPlan,
    ff_featurizer,
    Unsolved,
    action_elimination,
    collect_plan,
    make_examples,
    read_training_archive,
    run_training_problem,
    select_training_problems,
    write_training_archive,
)
from rankplan.search import Budget


def featurizer_for(task, kind="single"):
    layout = FeatureLayout.make(kind, task.schema_table)
    return ff_featurizer(task, layout), layout


def delivery(seed, **sizes):
    params = {"locations": 3, "packages": 1, "vehicles": 1, **sizes}
    dom, prob = generate_instance(GenSpec("delivery", params, seed))
    return ground(dom, prob), prob.name


def test_collect_plan_trivial_goal():
    task = make_task([("a", (), {"p"}, {"q"}, set())], init={"p", "q"}, goal={"q"})
    assert collect_plan(task) == []


def test_collect_plan_solves_delivery():
    for seed in range(4):
        task, _ = delivery(seed)
        plan = collect_plan(task)
        assert validate(task, task.init, plan).valid


def test_collect_plan_unsolved():
    task = make_task([("a", (), {"p"}, {"q"}, {"p"})], init={"p"}, goal={"r"},
                     extra_facts={"r"})
    with pytest.raises(Unsolved):
        collect_plan(task, problem_id="imp")


def test_action_elimination_removes_unconsumed_action():
    task = make_task(
        [
            ("useless", (), {"a"}, {"c"}, set()),
            ("solve", (), {"a"}, {"b"}, set()),
        ],
        init={"a"}, goal={"b"},
    )
    plan = [task.action_id("useless", ()), task.action_id("solve", ())]
    slim = action_elimination(task, plan)
    assert slim == [task.action_id("solve", ())]


def test_action_elimination_removes_cascading_detour(delivery_task):
    # detour moves whose effects are re-established and never needed
    move12 = delivery_task.action_id("move", ("truck1", "loc1", "loc2"))
    pick = delivery_task.action_id("pick", ("pkg1", "loc2", "truck1"))
    move23 = delivery_task.action_id("move", ("truck1", "loc2", "loc3"))
    drop = delivery_task.action_id("drop", ("pkg1", "loc3", "truck1"))
    plan = [move12, pick, move23, drop]
    assert validate(delivery_task, delivery_task.init, plan).valid
    assert action_elimination(delivery_task, plan) == plan  # already minimal


def test_action_elimination_minimal_plan_unchanged(chain_task):
    plan = [chain_task.action_id("a1", ()), chain_task.action_id("a2", ())]
    assert action_elimination(chain_task, plan) == plan


def test_action_elimination_idempotent():
    for seed in range(5):
        task, _ = delivery(seed, locations=4, packages=2)
        plan = collect_plan(task)
        once = action_elimination(task, plan)
        twice = action_elimination(task, once)
        assert once == twice
        assert len(once) <= len(plan)
        assert validate(task, task.init, once).valid


def test_action_elimination_rejects_invalid_plan(chain_task):
    a2 = chain_task.action_id("a2", ())
    with pytest.raises(InvalidInputPlan):
        action_elimination(chain_task, [a2])


def test_make_examples_labels_and_goal_state():
    task, name = delivery(1)
    plan = collect_plan(task)
    fz, layout = featurizer_for(task)
    group = make_examples(task, plan, fz, name)
    length = len(plan)
    assert group.targets.tolist() == list(range(length, -1, -1))
    # goal-state example: base-h and unsat-goals slots are zero
    assert group.features[-1][-3] == 0
    assert group.features[-1][-1] == 0


def test_make_examples_empty_plan():
    task = make_task([("a", (), {"p"}, {"q"}, set())], init={"p", "q"}, goal={"q"})
    fz, _ = featurizer_for(task)
    group = make_examples(task, [], fz, "triv")
    assert group.size == 1
    assert group.targets.tolist() == [0]


def test_make_examples_flags_dead_end_featurizer():
    from rankplan.pipeline import DeadEndOnPlan

    task = make_task([("a", (), {"p"}, {"q"}, set())], init={"p", "q"}, goal={"q"})
    with pytest.raises(DeadEndOnPlan):
        make_examples(task, [], lambda s: None, "broken")


def test_ff_featurizer_returns_none_on_dead_end():
    task = make_task([("a", (), {"p"}, {"q"}, set())], init={"q"}, goal={"p"})
    fz = ff_featurizer(task, FeatureLayout.single(task.schema_table))
    assert fz(task.init) is None


def test_make_examples_no_offplan_states():
    task, name = delivery(2)
    plan = collect_plan(task)
    fz, _ = featurizer_for(task)
    group = make_examples(task, plan, fz, name)
    assert group.size == len(plan) + 1


def test_run_training_problem_provenance():
    task, name = delivery(3)
    fz, _ = featurizer_for(task)
    run = run_training_problem(task, name, fz, Budget(max_expansions=10000))
    assert run.provenance["final_length"] <= run.provenance["raw_length"]
    assert run.provenance["post_processing"] == "action-elimination"
    assert validate(task, task.init, run.plan).valid


def test_select_training_problems_deterministic_cap():
    ids = [f"p{i}" for i in range(25)]
    a = select_training_problems(ids, seed=9)
    b = select_training_problems(ids, seed=9)
    assert a == b
    assert len(a) == 10
    assert set(a) <= set(ids)
    assert select_training_problems(ids[:4], seed=9) == sorted(ids[:4])


def test_training_archive_round_trip(tmp_path):
    runs = []
    layout = None
    for seed in range(3):
        task, name = delivery(seed)
        fz, layout = featurizer_for(task)
        runs.append(run_training_problem(task, name, fz))
    write_training_archive(tmp_path / "arch", runs, layout, seed=42)
    ts, loaded_layout, manifest = read_training_archive(tmp_path / "arch")
    assert loaded_layout == layout
    assert manifest["seed"] == 42
    assert len(ts.groups) == 3
    for run, group in zip(runs, ts.groups):
        assert group.problem_id == run.problem_id
        assert np.array_equal(group.features, run.group.features)
        assert np.array_equal(group.targets, run.group.targets)
