from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankplan.errors import RankplanError
from rankplan.pddl import (
    ArityMismatch,
    DomainNameMismatch,
    PddlSyntaxError,
    UnsupportedFeature,
    format_domain,
    format_problem,
    parse_domain,
    parse_problem,
)

MINI_DOMAIN = """
(define (domain mini)
  (:requirements :strips :typing)
  (:types loc - object)
  (:predicates (at ?x - loc))
)
"""


def test_minimal_domain_one_predicate_zero_actions():
    dom = parse_domain(MINI_DOMAIN)
    assert dom.name == "mini"
    assert [(p.name, p.arity) for p in dom.predicates] == [("at", 1)]
    assert dom.actions == ()


def test_effect_variable_not_in_parameters_rejected():
    text = """
    (define (domain bad)
      (:predicates (p ?x - object))
      (:action act :parameters (?x - object)
        :precondition (and (p ?x))
        :effect (and (p ?y))))
    """
    with pytest.raises(PddlSyntaxError, match="not in parameter list"):
        parse_domain(text)


def test_delivery_fixture_counts(delivery_dom):
    assert len(delivery_dom.predicates) == 3
    assert [a.name for a in delivery_dom.actions] == ["move", "pick", "drop"]


def test_delivery_problem_counts(delivery_prob):
    assert len(delivery_prob.objects) == 7
    assert len(delivery_prob.init) == 5
    assert len(delivery_prob.goal) == 1


def test_empty_goal_allowed(delivery_dom):
    text = """
    (define (problem empty) (:domain delivery)
      (:objects l1 - location) (:init) (:goal (and)))
    """
    prob = parse_problem(text, delivery_dom)
    assert prob.goal == frozenset()


def test_wrong_argument_type_rejected(delivery_dom):
    text = """
    (define (problem bad) (:domain delivery)
      (:objects truck1 truck2 - vehicle)
      (:init (at truck1 truck2))
      (:goal (and)))
    """
    with pytest.raises(ArityMismatch):
        parse_problem(text, delivery_dom)


def test_wrong_arity_rejected(delivery_dom):
    text = """
    (define (problem bad) (:domain delivery)
      (:objects truck1 - vehicle l1 - location)
      (:init (at truck1 l1 l1))
      (:goal (and)))
    """
    with pytest.raises(ArityMismatch):
        parse_problem(text, delivery_dom)


def test_domain_name_mismatch(delivery_dom):
    text = "(define (problem p) (:domain transport) (:objects) (:init) (:goal (and)))"
    with pytest.raises(DomainNameMismatch):
        parse_problem(text, delivery_dom)


@pytest.mark.parametrize("snippet,message", [
    ("(:requirements :strips :adl)", "adl"),
    ("(:requirements :action-costs)", "action-costs"),
])
def test_requirement_flags_rejected(snippet, message):
    text = f"(define (domain d) {snippet} (:predicates (p)))"
    with pytest.raises(UnsupportedFeature, match=message):
        parse_domain(text)


@pytest.mark.parametrize("body", [
    ":precondition (and (not (p ?x)))",                      # negative precondition
    ":precondition (or (p ?x))",                             # disjunction
    ":effect (and (when (p ?x) (p ?x)))",                    # conditional effect
    ":effect (and (forall (?y - object) (p ?y)))",           # quantified effect
])
def test_adl_constructs_rejected(body):
    text = f"""
    (define (domain d)
      (:predicates (p ?x - object))
      (:action act :parameters (?x - object) {body}))
    """
    with pytest.raises(UnsupportedFeature):
        parse_domain(text)


def test_either_types_rejected():
    text = """
    (define (domain d)
      (:predicates (p ?x - (either a b)))
    )
    """
    with pytest.raises(UnsupportedFeature, match="either"):
        parse_domain(text)


def test_add_delete_overlap_rejected():
    text = """
    (define (domain d)
      (:predicates (p ?x - object))
      (:action act :parameters (?x - object)
        :effect (and (p ?x) (not (p ?x)))))
    """
    with pytest.raises(PddlSyntaxError, match="both add and delete"):
        parse_domain(text)


def test_identifiers_case_insensitive(delivery_dom, delivery_problem_text):
    prob = parse_problem(delivery_problem_text.upper(), delivery_dom)
    assert ("at", ("pkg1", "loc3")) in prob.goal


def test_syntax_errors_carry_position():
    with pytest.raises(PddlSyntaxError) as info:
        parse_domain("(define (domain d)\n  (:bogus-section x))")
    assert info.value.line == 2
    assert info.value.col >= 1


def test_unbalanced_parens():
    with pytest.raises(PddlSyntaxError):
        parse_domain("(define (domain d)")
    with pytest.raises(PddlSyntaxError):
        parse_domain("(define (domain d)))")


def test_domain_round_trip(delivery_dom):
    assert parse_domain(format_domain(delivery_dom)) == delivery_dom


def test_problem_round_trip(delivery_dom, delivery_prob):
    printed = format_problem(delivery_prob, delivery_dom)
    assert parse_problem(printed, delivery_dom) == delivery_prob


def test_generated_families_round_trip():
    from rankplan.generators import GenSpec, generate_instance

    for family, sizes in [
        ("delivery", {"locations": 4, "packages": 2, "vehicles": 2}),
        ("chains", {"length": 3, "width": 2}),
        ("parking-lite", {"cars": 2, "curbs": 4}),
    ]:
        dom, prob = generate_instance(GenSpec(family, sizes, seed=5))
        assert parse_domain(format_domain(dom)) == dom
        assert parse_problem(format_problem(prob, dom), dom) == prob


RESERVED = {"define", "domain", "problem", "and", "or", "not", "when", "forall",
            "exists", "imply", "either", "object", "increase", "decrease", "assign"}

names = st.from_regex(r"[a-z][a-z0-9\-]{0,5}", fullmatch=True).filter(
    lambda s: s not in RESERVED and not s.endswith("-"))


@st.composite
def fuzzed_domains(draw):
    from rankplan.pddl import ActionSchema, DomainDef, PredicateSchema, ROOT_TYPE

    type_names = draw(st.lists(names, min_size=1, max_size=3, unique=True))
    types = {ROOT_TYPE: ROOT_TYPE}
    for i, t in enumerate(type_names):
        types[t] = draw(st.sampled_from([ROOT_TYPE] + type_names[:i]))
    pool = [ROOT_TYPE] + type_names

    pred_names = draw(st.lists(names, min_size=1, max_size=4, unique=True))
    predicates = []
    for pname in pred_names:
        arity = draw(st.integers(0, 3))
        params = tuple((f"?p{i}", draw(st.sampled_from(pool))) for i in range(arity))
        predicates.append(PredicateSchema(pname, params))

    actions = []
    action_names = draw(st.lists(names.filter(lambda s: s not in pred_names),
                                 max_size=3, unique=True))
    for aname in action_names:
        n_params = draw(st.integers(0, 3))
        params = tuple((f"?v{i}", draw(st.sampled_from(pool))) for i in range(n_params))

        def literal():
            pred = draw(st.sampled_from(predicates))
            args = []
            for _, want in pred.params:
                # argument type must relate to the parameter type either way
                options = [v for v, have in params
                           if _subtype(types, have, want) or _subtype(types, want, have)]
                if not options:
                    return None
                args.append(draw(st.sampled_from(options)))
            return (pred.name, tuple(args))

        lits = [l for l in (literal() for _ in range(draw(st.integers(0, 5)))) if l]
        pre = frozenset(lits[:2])
        add = frozenset(lits[2:4])
        delete = frozenset(lits[4:]) - add
        actions.append(ActionSchema(aname, params, pre, add, delete))

    return DomainDef(draw(names), types, (), tuple(predicates), tuple(actions))


def _subtype(types, typ, ancestor):
    seen = set()
    while typ not in seen:
        if typ == ancestor:
            return True
        seen.add(typ)
        typ = types.get(typ, "object")
    return False


@settings(max_examples=150, deadline=None)
@given(fuzzed_domains())
def test_fuzzed_domain_round_trip(dom):
    assert parse_domain(format_domain(dom)) == dom


@st.composite
def fuzzed_problems(draw, dom):
    from rankplan.pddl import ProblemDef

    pool = list(dom.types)
    objs = draw(st.lists(names, min_size=1, max_size=5, unique=True))
    objects = tuple((o, draw(st.sampled_from(pool))) for o in objs)

    def atoms():
        out = set()
        for _ in range(draw(st.integers(0, 5))):
            pred = draw(st.sampled_from(dom.predicates))
            args = []
            for _, want in pred.params:
                options = [o for o, have in objects if dom.is_subtype(have, want)]
                if not options:
                    break
                args.append(draw(st.sampled_from(options)))
            else:
                out.add((pred.name, tuple(args)))
        return frozenset(out)

    return ProblemDef(draw(names), dom.name, objects, atoms(), atoms())


@st.composite
def fuzzed_pairs(draw):
    dom = draw(fuzzed_domains())
    return dom, draw(fuzzed_problems(dom))


@settings(max_examples=150, deadline=None)
@given(fuzzed_pairs())
def test_fuzzed_problem_round_trip(pair):
    dom, prob = pair
    assert parse_problem(format_problem(prob, dom), dom) == prob


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=200))
def test_parser_total_on_arbitrary_text(text):
    try:
        parse_domain(text)
    except RankplanError:
        pass  # positioned/semantic errors are the contract; crashes are not


@settings(max_examples=200, deadline=None)
@given(st.binary(max_size=200))
def test_parser_total_on_bytes(data):
    try:
        parse_domain(data.decode("latin-1"))
    except RankplanError:
        pass
