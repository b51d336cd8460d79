from __future__ import annotations

import random
from importlib import resources

import pytest

from rankplan.grounding import GroundTask, ground, make_task
from rankplan.pddl import parse_domain, parse_problem


@pytest.fixture(scope="session")
def delivery_domain_text() -> str:
    return resources.files("rankplan").joinpath("fixtures/delivery.pddl").read_text()


@pytest.fixture(scope="session")
def delivery_problem_text() -> str:
    return resources.files("rankplan").joinpath("fixtures/delivery-p01.pddl").read_text()


@pytest.fixture(scope="session")
def delivery_dom(delivery_domain_text):
    return parse_domain(delivery_domain_text)


@pytest.fixture(scope="session")
def delivery_prob(delivery_dom, delivery_problem_text):
    return parse_problem(delivery_problem_text, delivery_dom)


@pytest.fixture(scope="session")
def delivery_task(delivery_dom, delivery_prob) -> GroundTask:
    return ground(delivery_dom, delivery_prob)


@pytest.fixture()
def chain_task() -> GroundTask:
    """p0 -a1-> p1 -a2-> p2, start {p0}, goal {p2}."""
    return make_task(
        [
            ("a1", (), {"p0"}, {"p1"}, set()),
            ("a2", (), {"p1"}, {"p2"}, set()),
        ],
        init={"p0"},
        goal={"p2"},
    )


def random_small_task(rng: random.Random, max_facts: int = 12, max_actions: int = 12) -> GroundTask:
    """Random STRIPS task over string facts; used by FF and search fuzzing."""
    n_facts = rng.randint(3, max_facts)
    facts = [f"f{i}" for i in range(n_facts)]
    n_actions = rng.randint(1, max_actions)
    actions = []
    for i in range(n_actions):
        pre = set(rng.sample(facts, rng.randint(0, min(3, n_facts))))
        add = set(rng.sample(facts, rng.randint(1, min(3, n_facts))))
        delete = set(rng.sample(facts, rng.randint(0, min(2, n_facts)))) - add
        schema = f"a{rng.randint(0, 4)}"
        actions.append((schema, (f"x{i}",), pre, add, delete))
    init = set(rng.sample(facts, rng.randint(1, n_facts)))
    goal = set(rng.sample(facts, rng.randint(1, min(4, n_facts))))
    return make_task(actions, init, goal)


def training_groups_for(specs: list[tuple[str, dict, int]], kind: str = "single"):
    """Solve generated instances and build (ProblemGroup, plan length) pairs."""
    from rankplan.features import FeatureLayout
    from rankplan.generators import GenSpec, generate_instance
    from rankplan.pipeline import ff_featurizer, run_training_problem

    out = []
    layout = None
    for family, sizes, seed in specs:
        dom, prob = generate_instance(GenSpec(family, sizes, seed))
        task = ground(dom, prob)
        if layout is None:
            layout = FeatureLayout.make(kind, task.schema_table)
        run = run_training_problem(task, prob.name, ff_featurizer(task, layout))
        out.append((run.group, len(run.plan)))
    return out, layout
