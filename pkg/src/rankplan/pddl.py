"""Typed-STRIPS PDDL frontend: tokenizer, parser, and pretty-printer.

Supported grammar: ``:strips`` + ``:typing`` requirements, ``(and ...)``
conjunctions, positive literals only.  Identifiers are case-insensitive and
normalized to lowercase.  Richer inputs (ADL, conditional effects, axioms,
negative preconditions, costs, ``either`` types) are rejected with a
positioned diagnostic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import RankplanError

ROOT_TYPE = "object"

_ACCEPTED_REQUIREMENTS = frozenset({":strips", ":typing"})

# Sections/connectives that mark features outside the STRIPS+typing subset.
_UNSUPPORTED_HEADS = frozenset({
    "or", "not", "imply", "when", "forall", "exists",
    "increase", "decrease", "assign", "scale-up", "scale-down", "=",
})


class PddlSyntaxError(RankplanError):
    """Malformed input; carries the 1-based source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class UnsupportedFeature(PddlSyntaxError):
    """Input is valid PDDL but outside the STRIPS+typing subset."""


class ArityMismatch(RankplanError):
    pass


class UnknownPredicate(RankplanError):
    pass


class DomainNameMismatch(RankplanError):
    pass


# ---------------------------------------------------------------------------
# domain / problem definitions

@dataclass(frozen=True)
class PredicateSchema:
    name: str
    params: tuple[tuple[str, str], ...]  # (variable, type)

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: tuple[tuple[str, str], ...]
    pre: frozenset[tuple[str, tuple[str, ...]]]
    add: frozenset[tuple[str, tuple[str, ...]]]
    delete: frozenset[tuple[str, tuple[str, ...]]]


@dataclass(frozen=True)
class DomainDef:
    name: str
    types: dict[str, str]  # type -> parent; root maps to itself
    constants: tuple[tuple[str, str], ...]
    predicates: tuple[PredicateSchema, ...]
    actions: tuple[ActionSchema, ...]

    def predicate(self, name: str) -> PredicateSchema:
        for p in self.predicates:
            if p.name == name:
                return p
        raise UnknownPredicate(f"undeclared predicate '{name}'")

    def is_subtype(self, typ: str, ancestor: str) -> bool:
        """True if `typ` equals or descends from `ancestor`."""
        seen = set()
        while typ not in seen:
            if typ == ancestor:
                return True
            seen.add(typ)
            typ = self.types.get(typ, ROOT_TYPE)
        return False


@dataclass(frozen=True)
class ProblemDef:
    name: str
    domain_name: str
    objects: tuple[tuple[str, str], ...]
    init: frozenset[tuple[str, tuple[str, ...]]]
    goal: frozenset[tuple[str, tuple[str, ...]]]


# ---------------------------------------------------------------------------
# tokenizer / s-expression reader

_ID_RE = re.compile(r"[?:]?[a-zA-Z0-9_\-]+")


@dataclass(frozen=True)
class _Tok:
    value: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch in " \t\r":
            i += 1
            col += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            toks.append(_Tok(ch, line, col))
            i += 1
            col += 1
        else:
            m = _ID_RE.match(text, i)
            if not m:
                raise PddlSyntaxError(f"unexpected character {ch!r}", line, col)
            toks.append(_Tok(m.group(0).lower(), line, col))
            col += m.end() - i
            i = m.end()
    return toks


class _SExpr(list):
    """Nested token list; `pos` is the position of the opening paren."""

    def __init__(self, pos: tuple[int, int]):
        super().__init__()
        self.pos = pos


def _read_sexpr(text: str) -> _SExpr:
    toks = _tokenize(text)
    if not toks:
        raise PddlSyntaxError("empty input", 1, 1)
    stack: list[_SExpr] = []
    root: _SExpr | None = None
    for t in toks:
        if t.value == "(":
            node = _SExpr((t.line, t.col))
            if stack:
                stack[-1].append(node)
            elif root is None:
                root = node
            else:
                raise PddlSyntaxError("trailing content after top-level form", t.line, t.col)
            stack.append(node)
        elif t.value == ")":
            if not stack:
                raise PddlSyntaxError("unbalanced ')'", t.line, t.col)
            stack.pop()
        else:
            if not stack:
                raise PddlSyntaxError("content outside top-level form", t.line, t.col)
            stack[-1].append(t)
    if stack:
        raise PddlSyntaxError("unbalanced '(': form never closed", stack[-1].pos[0], stack[-1].pos[1])
    assert root is not None
    return root


def _pos(node) -> tuple[int, int]:
    if isinstance(node, _SExpr):
        return node.pos
    return (node.line, node.col)


def _atom(node, what: str) -> str:
    if isinstance(node, _SExpr):
        raise PddlSyntaxError(f"expected {what}, got a parenthesized form", *node.pos)
    return node.value


# ---------------------------------------------------------------------------
# typed lists

def _parse_typed_list(items: list, *, variables: bool) -> list[tuple[str, str]]:
    """Parse ``a b - t c d`` groups into (name, type) pairs; untyped -> object."""
    out: list[tuple[str, str]] = []
    pending: list[str] = []
    i = 0
    while i < len(items):
        tok = items[i]
        val = _atom(tok, "name or '-'")
        if val == "-":
            if i + 1 >= len(items):
                raise PddlSyntaxError("dangling '-' in typed list", *_pos(tok))
            typ_node = items[i + 1]
            if isinstance(typ_node, _SExpr):
                raise UnsupportedFeature("'either' types are not supported", *typ_node.pos)
            typ = typ_node.value
            for name in pending:
                out.append((name, typ))
            pending = []
            i += 2
        else:
            if variables and not val.startswith("?"):
                raise PddlSyntaxError(f"expected variable, got '{val}'", *_pos(tok))
            if not variables and val.startswith("?"):
                raise PddlSyntaxError(f"unexpected variable '{val}'", *_pos(tok))
            pending.append(val)
            i += 1
    for name in pending:
        out.append((name, ROOT_TYPE))
    return out


def _parse_literal_list(node: _SExpr, what: str) -> list[tuple[_SExpr, str, tuple[str, ...]]]:
    """Flatten a formula into positive literals; reject anything non-STRIPS."""
    if len(node) == 0:
        return []
    head = node[0]
    head_val = head.value if not isinstance(head, _SExpr) else None
    if head_val == "and":
        lits = []
        for sub in node[1:]:
            if not isinstance(sub, _SExpr):
                raise PddlSyntaxError(f"expected literal in {what}", *_pos(sub))
            lits.extend(_parse_literal_list(sub, what))
        return lits
    if head_val in _UNSUPPORTED_HEADS:
        raise UnsupportedFeature(f"'{head_val}' is not allowed in {what} (STRIPS subset)", *node.pos)
    if head_val is None:
        raise PddlSyntaxError(f"expected literal in {what}", *node.pos)
    args = tuple(_atom(a, "argument") for a in node[1:])
    return [(node, head_val, args)]


# ---------------------------------------------------------------------------
# domain parsing

def parse_domain(text: str) -> DomainDef:
    """Parse PDDL domain text into a DomainDef; validates the STRIPS subset."""
    root = _read_sexpr(text)
    if len(root) < 2 or _atom(root[0], "'define'") != "define":
        raise PddlSyntaxError("expected (define (domain ...) ...)", *root.pos)
    header = root[1]
    if not isinstance(header, _SExpr) or len(header) != 2 or _atom(header[0], "'domain'") != "domain":
        raise PddlSyntaxError("expected (domain NAME)", *_pos(header))
    name = _atom(header[1], "domain name")

    declared_types: dict[str, str] = {}
    constants: list[tuple[str, str]] = []
    predicates: list[PredicateSchema] = []
    actions: list[ActionSchema] = []

    for section in root[2:]:
        if not isinstance(section, _SExpr) or len(section) == 0:
            raise PddlSyntaxError("expected domain section", *_pos(section))
        kind = _atom(section[0], "section keyword")
        if kind == ":requirements":
            for req in section[1:]:
                val = _atom(req, "requirement flag")
                if val not in _ACCEPTED_REQUIREMENTS:
                    raise UnsupportedFeature(f"requirement '{val}' is not supported", *_pos(req))
        elif kind == ":types":
            # parents may be forward references; only explicit declarations
            # participate in the duplicate check
            for tname, parent in _parse_typed_list(list(section[1:]), variables=False):
                if declared_types.get(tname, parent) != parent and tname != ROOT_TYPE:
                    raise PddlSyntaxError(f"type '{tname}' declared twice with different parents", *section.pos)
                declared_types[tname] = parent
        elif kind == ":constants":
            constants.extend(_parse_typed_list(list(section[1:]), variables=False))
        elif kind == ":predicates":
            for pred in section[1:]:
                if not isinstance(pred, _SExpr) or len(pred) == 0:
                    raise PddlSyntaxError("expected (name ?params...)", *_pos(pred))
                pname = _atom(pred[0], "predicate name")
                params = tuple(_parse_typed_list(list(pred[1:]), variables=True))
                predicates.append(PredicateSchema(pname, params))
        elif kind == ":action":
            actions.append(_parse_action(section))
        elif kind in (":functions", ":derived", ":axiom"):
            raise UnsupportedFeature(f"section '{kind}' is not supported", *section.pos)
        else:
            raise PddlSyntaxError(f"unknown domain section '{kind}'", *section.pos)

    types = {ROOT_TYPE: ROOT_TYPE, **declared_types}
    for parent in list(declared_types.values()):
        types.setdefault(parent, ROOT_TYPE)
    _check_type_hierarchy(types)
    dom = DomainDef(name, types, tuple(constants), tuple(predicates), tuple(actions))
    _check_domain(dom)
    return dom


def _parse_action(section: _SExpr) -> ActionSchema:
    if len(section) < 2:
        raise PddlSyntaxError("expected action name", *section.pos)
    name = _atom(section[1], "action name")
    params: tuple[tuple[str, str], ...] = ()
    pre: list = []
    add: list = []
    delete: list = []
    i = 2
    while i < len(section):
        key = _atom(section[i], "action keyword")
        if i + 1 >= len(section):
            raise PddlSyntaxError(f"missing body for '{key}'", *_pos(section[i]))
        body = section[i + 1]
        if not isinstance(body, _SExpr):
            raise PddlSyntaxError(f"expected parenthesized body for '{key}'", *_pos(body))
        if key == ":parameters":
            params = tuple(_parse_typed_list(list(body), variables=True))
        elif key == ":precondition":
            pre = _parse_literal_list(body, "preconditions")
        elif key == ":effect":
            add.extend(_iter_effect_literals(body))
        else:
            raise UnsupportedFeature(f"action keyword '{key}' is not supported", *_pos(section[i]))
        i += 2

    # split effects into add / delete
    adds: list[tuple[_SExpr, str, tuple[str, ...]]] = []
    dels: list[tuple[_SExpr, str, tuple[str, ...]]] = []
    for node, pname, args in add:
        if pname.startswith("!"):
            dels.append((node, pname[1:], args))
        else:
            adds.append((node, pname, args))

    pre_set = frozenset((p, a) for _, p, a in pre)
    add_set = frozenset((p, a) for _, p, a in adds)
    del_set = frozenset((p, a) for _, p, a in dels)
    if add_set & del_set:
        clash = sorted(add_set & del_set)[0]
        raise PddlSyntaxError(
            f"action '{name}': literal '{clash[0]}' appears in both add and delete effects",
            *section.pos,
        )
    return ActionSchema(name, params, pre_set, add_set, del_set)


def _iter_effect_literals(node: _SExpr):
    """Yield effect literals; deletes are tagged by prefixing '!' on the name."""
    if len(node) == 0:
        return
    head = node[0]
    head_val = head.value if not isinstance(head, _SExpr) else None
    if head_val == "and":
        for sub in node[1:]:
            if not isinstance(sub, _SExpr):
                raise PddlSyntaxError("expected effect literal", *_pos(sub))
            yield from _iter_effect_literals(sub)
        return
    if head_val == "not":
        if len(node) != 2 or not isinstance(node[1], _SExpr):
            raise PddlSyntaxError("expected (not (atom ...))", *node.pos)
        inner = node[1]
        pname = _atom(inner[0], "predicate name")
        if pname in _UNSUPPORTED_HEADS or pname == "and":
            raise UnsupportedFeature("nested connective under 'not'", *inner.pos)
        args = tuple(_atom(a, "argument") for a in inner[1:])
        yield node, "!" + pname, args
        return
    if head_val in _UNSUPPORTED_HEADS:
        raise UnsupportedFeature(f"'{head_val}' is not allowed in effects (STRIPS subset)", *node.pos)
    if head_val is None:
        raise PddlSyntaxError("expected effect literal", *node.pos)
    args = tuple(_atom(a, "argument") for a in node[1:])
    yield node, head_val, args


def _check_type_hierarchy(types: dict[str, str]) -> None:
    for t in types:
        seen = set()
        cur = t
        while cur != ROOT_TYPE:
            if cur in seen:
                raise PddlSyntaxError(f"type cycle involving '{cur}'", 1, 1)
            seen.add(cur)
            cur = types.get(cur, ROOT_TYPE)


def _check_domain(dom: DomainDef) -> None:
    preds = {p.name: p for p in dom.predicates}
    if len(preds) != len(dom.predicates):
        raise PddlSyntaxError("duplicate predicate declaration", 1, 1)
    for _, typ in dom.constants:
        if typ not in dom.types:
            raise PddlSyntaxError(f"constant of undeclared type '{typ}'", 1, 1)
    const_types = dict(dom.constants)
    for p in dom.predicates:
        for _, typ in p.params:
            if typ not in dom.types:
                raise PddlSyntaxError(f"predicate '{p.name}' uses undeclared type '{typ}'", 1, 1)
    for a in dom.actions:
        param_types = dict(a.params)
        for _, typ in a.params:
            if typ not in dom.types:
                raise PddlSyntaxError(f"action '{a.name}' uses undeclared type '{typ}'", 1, 1)
        for group in (a.pre, a.add, a.delete):
            for pname, args in group:
                if pname not in preds:
                    raise UnknownPredicate(f"action '{a.name}' references undeclared predicate '{pname}'")
                schema = preds[pname]
                if len(args) != schema.arity:
                    raise ArityMismatch(
                        f"action '{a.name}': '{pname}' expects {schema.arity} args, got {len(args)}"
                    )
                for arg, (_, want) in zip(args, schema.params):
                    if arg.startswith("?"):
                        if arg not in param_types:
                            raise PddlSyntaxError(
                                f"action '{a.name}': variable '{arg}' not in parameter list", 1, 1
                            )
                        have = param_types[arg]
                    elif arg in const_types:
                        have = const_types[arg]
                    else:
                        raise PddlSyntaxError(
                            f"action '{a.name}': '{arg}' is neither a parameter nor a constant", 1, 1
                        )
                    if not (dom.is_subtype(have, want) or dom.is_subtype(want, have)):
                        raise ArityMismatch(
                            f"action '{a.name}': argument '{arg}' of type '{have}' "
                            f"incompatible with '{want}' in '{pname}'"
                        )


# ---------------------------------------------------------------------------
# problem parsing

def parse_problem(text: str, dom: DomainDef) -> ProblemDef:
    """Parse PDDL problem text and validate it against `dom`."""
    root = _read_sexpr(text)
    if len(root) < 2 or _atom(root[0], "'define'") != "define":
        raise PddlSyntaxError("expected (define (problem ...) ...)", *root.pos)
    header = root[1]
    if not isinstance(header, _SExpr) or len(header) != 2 or _atom(header[0], "'problem'") != "problem":
        raise PddlSyntaxError("expected (problem NAME)", *_pos(header))
    name = _atom(header[1], "problem name")

    domain_name = ""
    objects: list[tuple[str, str]] = []
    init: list[tuple[str, tuple[str, ...]]] = []
    goal: list[tuple[str, tuple[str, ...]]] = []

    for section in root[2:]:
        if not isinstance(section, _SExpr) or len(section) == 0:
            raise PddlSyntaxError("expected problem section", *_pos(section))
        kind = _atom(section[0], "section keyword")
        if kind == ":domain":
            domain_name = _atom(section[1], "domain name")
        elif kind == ":requirements":
            for req in section[1:]:
                val = _atom(req, "requirement flag")
                if val not in _ACCEPTED_REQUIREMENTS:
                    raise UnsupportedFeature(f"requirement '{val}' is not supported", *_pos(req))
        elif kind == ":objects":
            objects.extend(_parse_typed_list(list(section[1:]), variables=False))
        elif kind == ":init":
            for sub in section[1:]:
                if not isinstance(sub, _SExpr):
                    raise PddlSyntaxError("expected ground atom in :init", *_pos(sub))
                for node, pname, args in _parse_literal_list(sub, ":init"):
                    init.append((pname, args))
        elif kind == ":goal":
            if len(section) != 2 or not isinstance(section[1], _SExpr):
                raise PddlSyntaxError("expected (:goal FORMULA)", *section.pos)
            for node, pname, args in _parse_literal_list(section[1], ":goal"):
                goal.append((pname, args))
        elif kind == ":metric":
            raise UnsupportedFeature("':metric' is not supported", *section.pos)
        else:
            raise PddlSyntaxError(f"unknown problem section '{kind}'", *section.pos)

    if domain_name != dom.name:
        raise DomainNameMismatch(f"problem is for domain '{domain_name}', expected '{dom.name}'")

    all_objects = tuple(dom.constants) + tuple(objects)
    prob = ProblemDef(name, domain_name, all_objects, frozenset(init), frozenset(goal))
    _check_problem(prob, dom)
    return prob


def _check_problem(prob: ProblemDef, dom: DomainDef) -> None:
    obj_types: dict[str, str] = {}
    for oname, otype in prob.objects:
        if otype not in dom.types:
            raise PddlSyntaxError(f"object '{oname}' of undeclared type '{otype}'", 1, 1)
        if oname in obj_types:
            raise PddlSyntaxError(f"object '{oname}' declared twice", 1, 1)
        obj_types[oname] = otype
    for where, atoms in (("init", prob.init), ("goal", prob.goal)):
        for pname, args in atoms:
            schema = dom.predicate(pname)
            if len(args) != schema.arity:
                raise ArityMismatch(f"{where}: '{pname}' expects {schema.arity} args, got {len(args)}")
            for arg, (_, want) in zip(args, schema.params):
                if arg not in obj_types:
                    raise PddlSyntaxError(f"{where}: unknown object '{arg}'", 1, 1)
                if not dom.is_subtype(obj_types[arg], want):
                    raise ArityMismatch(
                        f"{where}: '{arg}' of type '{obj_types[arg]}' incompatible with "
                        f"'{want}' in '{pname}'"
                    )


# ---------------------------------------------------------------------------
# pretty-printing (round-trip support)

def _format_atom(pname: str, args: tuple[str, ...]) -> str:
    return "(" + " ".join((pname,) + args) + ")"


def _format_typed(pairs: tuple[tuple[str, str], ...]) -> str:
    return " ".join(f"{n} - {t}" for n, t in pairs)


def format_domain(dom: DomainDef) -> str:
    lines = [f"(define (domain {dom.name})", "  (:requirements :strips :typing)"]
    declared = [t for t in dom.types if t != ROOT_TYPE]
    if declared:
        lines.append("  (:types " + " ".join(f"{t} - {dom.types[t]}" for t in sorted(declared)) + ")")
    if dom.constants:
        lines.append("  (:constants " + _format_typed(dom.constants) + ")")
    lines.append("  (:predicates")
    for p in dom.predicates:
        lines.append("    (" + " ".join([p.name] + [f"{n} - {t}" for n, t in p.params]) + ")")
    lines.append("  )")
    for a in dom.actions:
        lines.append(f"  (:action {a.name}")
        lines.append(f"    :parameters ({_format_typed(a.params)})")
        pre = " ".join(_format_atom(p, ar) for p, ar in sorted(a.pre))
        lines.append(f"    :precondition (and {pre})")
        effs = [_format_atom(p, ar) for p, ar in sorted(a.add)]
        effs += ["(not " + _format_atom(p, ar) + ")" for p, ar in sorted(a.delete)]
        lines.append("    :effect (and " + " ".join(effs) + ")")
        lines.append("  )")
    lines.append(")")
    return "\n".join(lines) + "\n"


def format_problem(prob: ProblemDef, dom: DomainDef | None = None) -> str:
    const_names = {n for n, _ in dom.constants} if dom else set()
    own = [(n, t) for n, t in prob.objects if n not in const_names]
    lines = [
        f"(define (problem {prob.name})",
        f"  (:domain {prob.domain_name})",
        "  (:objects " + _format_typed(tuple(own)) + ")",
        "  (:init",
    ]
    for pname, args in sorted(prob.init):
        lines.append("    " + _format_atom(pname, args))
    lines.append("  )")
    lines.append("  (:goal (and")
    for pname, args in sorted(prob.goal):
        lines.append("    " + _format_atom(pname, args))
    lines.append("  ))")
    lines.append(")")
    return "\n".join(lines) + "\n"
