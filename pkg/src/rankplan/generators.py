"""Deterministic synthetic instance generators for desk-scale experiments.

Three families: `delivery` (vehicles move packages over a road graph),
`chains` (independent linear chains; delete-relaxation exact), and
`parking-lite` (cars shuffled between curbs through a free slot).  Every
instance is solvable by construction; a witness plan is available for
tests.  Output is deterministic in (family, sizes, seed), down to the byte.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from importlib import resources
from typing import Mapping

from .errors import RankplanError
from .pddl import DomainDef, ProblemDef, parse_domain, parse_problem

DELIVERY = "delivery"
CHAINS = "chains"
PARKING_LITE = "parking-lite"

SIZE_KEYS = {
    DELIVERY: ("locations", "packages", "vehicles"),
    CHAINS: ("length", "width"),
    PARKING_LITE: ("cars", "curbs"),
}

_CHAINS_DOMAIN = """\
(define (domain chains)
  (:requirements :strips :typing)
  (:types chain stage - object)
  (:predicates
    (reached ?c - chain ?s - stage)
    (next ?a - stage ?b - stage))
  (:action advance
    :parameters (?c - chain ?from - stage ?to - stage)
    :precondition (and (reached ?c ?from) (next ?from ?to))
    :effect (and (reached ?c ?to) (not (reached ?c ?from))))
)
"""

_PARKING_DOMAIN = """\
(define (domain parking-lite)
  (:requirements :strips :typing)
  (:types car curb - object)
  (:predicates
    (on ?c - car ?k - curb)
    (free ?k - curb))
  (:action move
    :parameters (?c - car ?from - curb ?to - curb)
    :precondition (and (on ?c ?from) (free ?to))
    :effect (and (on ?c ?to) (free ?from) (not (on ?c ?from)) (not (free ?to))))
)
"""


class InvalidSpec(RankplanError):
    pass


@dataclass(frozen=True)
class GenSpec:
    family: str
    sizes: Mapping[str, int]
    seed: int

    def __post_init__(self):
        if self.family not in SIZE_KEYS:
            raise InvalidSpec(f"unknown family '{self.family}'")
        wanted = SIZE_KEYS[self.family]
        if set(self.sizes) != set(wanted):
            raise InvalidSpec(f"family '{self.family}' needs sizes {wanted}, got {tuple(self.sizes)}")
        for key, value in self.sizes.items():
            if value < 1:
                raise InvalidSpec(f"size parameter '{key}' must be >= 1")
        if self.family == PARKING_LITE and self.sizes["curbs"] <= self.sizes["cars"]:
            raise InvalidSpec("parking-lite needs more curbs than cars (one must stay free)")

    def problem_name(self) -> str:
        parts = "-".join(f"{k[0]}{self.sizes[k]}" for k in SIZE_KEYS[self.family])
        return f"{self.family}-{parts}-s{self.seed}"


def delivery_domain_text() -> str:
    return resources.files("rankplan").joinpath("fixtures/delivery.pddl").read_text()


def generate_pddl(spec: GenSpec) -> tuple[str, str]:
    """Domain and problem PDDL text, byte-deterministic in the spec."""
    domain_text, problem_text, _ = _generate(spec)
    return domain_text, problem_text


def generate_instance(spec: GenSpec) -> tuple[DomainDef, ProblemDef]:
    domain_text, problem_text, _ = _generate(spec)
    dom = parse_domain(domain_text)
    return dom, parse_problem(problem_text, dom)


def generate_with_witness(spec: GenSpec):
    """Like generate_instance but also returns the construction's witness plan
    as (schema-name, args) steps.  Test use only; training never consumes it."""
    domain_text, problem_text, witness = _generate(spec)
    dom = parse_domain(domain_text)
    return dom, parse_problem(problem_text, dom), witness


def _generate(spec: GenSpec):
    if spec.family == DELIVERY:
        return _gen_delivery(spec)
    if spec.family == CHAINS:
        return _gen_chains(spec)
    return _gen_parking(spec)


def _problem_text(name: str, domain: str, objects: list[tuple[str, str]],
                  init: list[str], goal: list[str]) -> str:
    lines = [f"(define (problem {name})", f"  (:domain {domain})", "  (:objects"]
    for oname, otype in objects:
        lines.append(f"    {oname} - {otype}")
    lines.append("  )")
    lines.append("  (:init")
    lines.extend(f"    {atom}" for atom in init)
    lines.append("  )")
    lines.append("  (:goal (and")
    lines.extend(f"    {atom}" for atom in goal)
    lines.append("  ))")
    lines.append(")")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# delivery

def _gen_delivery(spec: GenSpec):
    n_loc = spec.sizes["locations"]
    n_pkg = spec.sizes["packages"]
    n_veh = spec.sizes["vehicles"]
    rng = random.Random(spec.seed)

    locs = [f"loc{i + 1}" for i in range(n_loc)]
    vehicles = [f"truck{i + 1}" for i in range(n_veh)]
    packages = [f"pkg{i + 1}" for i in range(n_pkg)]

    # random spanning tree plus a few extra edges, always bidirectional
    edges: set[tuple[str, str]] = set()
    for i in range(1, n_loc):
        j = rng.randrange(i)
        edges.add((locs[j], locs[i]))
        edges.add((locs[i], locs[j]))
    for _ in range(n_loc // 2):
        a, b = rng.randrange(n_loc), rng.randrange(n_loc)
        if a != b:
            edges.add((locs[a], locs[b]))
            edges.add((locs[b], locs[a]))

    veh_at = {v: rng.choice(locs) for v in vehicles}
    pkg_src = {p: rng.choice(locs) for p in packages}
    pkg_dst = {}
    for p in packages:
        others = [l for l in locs if l != pkg_src[p]]
        pkg_dst[p] = rng.choice(others) if others else pkg_src[p]

    init = [f"(at {v} {veh_at[v]})" for v in vehicles]
    init += [f"(at {p} {pkg_src[p]})" for p in packages]
    init += [f"(road {a} {b})" for a, b in sorted(edges)]
    goal = [f"(at {p} {pkg_dst[p]})" for p in packages]

    objects = [(v, "vehicle") for v in vehicles]
    objects += [(p, "package") for p in packages]
    objects += [(l, "location") for l in locs]
    problem_text = _problem_text(spec.problem_name(), "delivery", objects, init, goal)

    # witness: the first truck ferries each package in id order
    adjacency: dict[str, list[str]] = {l: [] for l in locs}
    for a, b in sorted(edges):
        adjacency[a].append(b)
    witness: list[tuple[str, tuple[str, ...]]] = []
    truck = vehicles[0]
    cur = veh_at[truck]
    for p in packages:
        if pkg_src[p] == pkg_dst[p]:
            continue
        for a, b in _bfs_path(adjacency, cur, pkg_src[p]):
            witness.append(("move", (truck, a, b)))
        witness.append(("pick", (p, pkg_src[p], truck)))
        for a, b in _bfs_path(adjacency, pkg_src[p], pkg_dst[p]):
            witness.append(("move", (truck, a, b)))
        witness.append(("drop", (p, pkg_dst[p], truck)))
        cur = pkg_dst[p]

    return delivery_domain_text(), problem_text, witness


def _bfs_path(adjacency: dict[str, list[str]], src: str, dst: str) -> list[tuple[str, str]]:
    if src == dst:
        return []
    prev = {src: src}
    frontier = [src]
    while frontier:
        nxt = []
        for node in frontier:
            for nb in adjacency[node]:
                if nb not in prev:
                    prev[nb] = node
                    nxt.append(nb)
        frontier = nxt
        if dst in prev:
            break
    if dst not in prev:
        raise RankplanError("road graph unexpectedly disconnected")
    path = [dst]
    while path[-1] != src:
        path.append(prev[path[-1]])
    path.reverse()
    return list(zip(path, path[1:]))


# ---------------------------------------------------------------------------
# chains

def _gen_chains(spec: GenSpec):
    length = spec.sizes["length"]
    width = spec.sizes["width"]
    stages = [f"s{i}" for i in range(length + 1)]
    chains = [f"c{i + 1}" for i in range(width)]

    init = [f"(reached {c} s0)" for c in chains]
    init += [f"(next s{i} s{i + 1})" for i in range(length)]
    goal = [f"(reached {c} s{length})" for c in chains]
    objects = [(c, "chain") for c in chains] + [(s, "stage") for s in stages]
    problem_text = _problem_text(spec.problem_name(), "chains", objects, init, goal)

    witness = [("advance", (c, f"s{i}", f"s{i + 1}")) for c in chains for i in range(length)]
    return _CHAINS_DOMAIN, problem_text, witness


# ---------------------------------------------------------------------------
# parking-lite

def _gen_parking(spec: GenSpec):
    n_cars = spec.sizes["cars"]
    n_curbs = spec.sizes["curbs"]
    rng = random.Random(spec.seed)

    cars = [f"car{i + 1}" for i in range(n_cars)]
    curbs = [f"curb{i + 1}" for i in range(n_curbs)]
    start = rng.sample(curbs, n_cars)
    target = rng.sample(curbs, n_cars)

    init = [f"(on {c} {k})" for c, k in zip(cars, start)]
    init += [f"(free {k})" for k in curbs if k not in set(start)]
    goal = [f"(on {c} {k})" for c, k in zip(cars, target)]
    objects = [(c, "car") for c in cars] + [(k, "curb") for k in curbs]
    problem_text = _problem_text(spec.problem_name(), "parking-lite", objects, init, goal)

    witness = _parking_witness(cars, curbs, dict(zip(cars, start)), dict(zip(cars, target)))
    return _PARKING_DOMAIN, problem_text, witness


def _parking_witness(cars, curbs, pos: dict[str, str], target: dict[str, str]):
    free = sorted(set(curbs) - set(pos.values()))
    occupant = {k: c for c, k in pos.items()}
    moves: list[tuple[str, tuple[str, ...]]] = []

    def relocate(car: str, dst: str):
        src = pos[car]
        moves.append(("move", (car, src, dst)))
        del occupant[src]
        occupant[dst] = car
        pos[car] = dst
        free.remove(dst)
        free.append(src)
        free.sort()

    while True:
        misplaced = [c for c in cars if pos[c] != target[c]]
        if not misplaced:
            return moves
        placeable = [c for c in misplaced if target[c] in free]
        if placeable:
            relocate(placeable[0], target[placeable[0]])
            continue
        # every open target is blocked by a misplaced car: break a cycle by
        # parking the lowest blocking car on a free curb
        blocking = [c for c in misplaced if pos[c] in {target[m] for m in misplaced}]
        relocate(blocking[0], free[0])
