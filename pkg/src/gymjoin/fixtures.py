"""Query families, seeded data generators, and their reference GHDs.

Families:

* ``S_n``  star:  S(A1..A{n-1}) joined with R_i(A_i, B_i) for i < n
* ``C_n``  chain: R_i(A_{i-1}, A_i) for i = 1..n
* ``TC_n`` triangle chain: n/3 triangles, consecutive ones sharing one attribute

Atom ids follow the relation subscripts and run 1..n in text order; the
star's hub ``S`` comes last with id n.
"""
from __future__ import annotations

import math
import random

from gymjoin.ghd import Ghd
from gymjoin.query import Atom, Database, Query
from gymjoin.relation import Relation

FAMILIES = ("S_n", "C_n", "TC_n")
_ALIASES = {"S": "S_n", "C": "C_n", "TC": "TC_n", "C_GROUPED": "C_n_grouped"}


def normalize_family(family: str) -> str:
    key = family.strip()
    if key in FAMILIES or key == "C_n_grouped":
        return key
    up = key.upper()
    if up in _ALIASES:
        return _ALIASES[up]
    for fam in FAMILIES + ("C_n_grouped",):
        if fam.upper() == up:
            return fam
    raise ValueError(f"unknown query family {family!r}")


def _check_n(family: str, n: int):
    if n < 1:
        raise ValueError(f"{family} needs n >= 1, got {n}")
    if family == "S_n" and n < 2:
        raise ValueError("S_n needs n >= 2 (the hub needs at least one attribute)")
    if family == "TC_n" and n % 3:
        raise ValueError(f"TC_n needs n divisible by 3, got {n}")


def fixture_query(family: str, n: int) -> Query:
    family = normalize_family(family)
    if family == "C_n_grouped":
        family = "C_n"
    _check_n(family, n)
    if family == "S_n":
        atoms = [Atom(i, f"R{i}", (f"A{i}", f"B{i}")) for i in range(1, n)]
        atoms.append(Atom(n, "S", tuple(f"A{i}" for i in range(1, n))))
    elif family == "C_n":
        atoms = [Atom(i, f"R{i}", (f"A{i - 1}", f"A{i}")) for i in range(1, n + 1)]
    else:
        atoms = []
        for j in range(n // 3):
            a, b, c = f"A{2 * j}", f"A{2 * j + 1}", f"A{2 * j + 2}"
            for k, attrs in enumerate(((a, b), (a, c), (b, c)), start=1):
                atoms.append(Atom(3 * j + k, f"R{3 * j + k}", attrs))
    return Query(atoms)


def gen_data(
    q: Query,
    seed: int = 0,
    domain: int = 8,
    rows: int = 16,
    matching: bool = False,
) -> dict[str, Relation]:
    """One relation per distinct relation name in ``q``.

    Uniform mode draws ``rows`` tuples from ``[1, domain]`` and keeps the
    distinct ones. Matching mode builds every column from a prefix of a
    random permutation of ``1..domain``, so no value repeats within a column.
    """
    if matching and rows > domain:
        raise ValueError(f"matching mode needs domain >= rows ({domain} < {rows})")
    arity = {}
    for a in q.atoms:
        arity.setdefault(a.relation, len(a.attrs))
    db = {}
    for name in sorted(arity):
        rng = random.Random(f"{seed}/{name}")
        k = arity[name]
        schema = tuple(f"c{i}" for i in range(k))
        if matching:
            cols = [rng.sample(range(1, domain + 1), rows) for _ in range(k)]
            data = set(zip(*cols))
        else:
            data = {tuple(rng.randint(1, domain) for _ in range(k)) for _ in range(rows)}
        db[name] = Relation(name, schema, frozenset(data))
    return db


def gen_fixture(family: str, n: int, seed: int = 0, domain: int = 8, rows: int = 16, matching: bool = False):
    """``(query, database)`` for one of the named families."""
    q = fixture_query(family, n)
    return q, gen_data(q, seed, domain, rows, matching)


def random_tree(n: int, rng: random.Random, chain_bias: float = 0.0) -> dict[int, int]:
    """Parent map of a random rooted tree on nodes ``1..n`` (root 1).

    Node ``i`` hangs under ``i - 1`` with probability ``chain_bias`` and
    under a uniformly random earlier node otherwise.
    """
    parent = {}
    for i in range(2, n + 1):
        parent[i] = i - 1 if rng.random() < chain_bias else rng.randint(1, i - 1)
    return parent


def children_of(parent: dict[int, int], n: int) -> dict[int, list[int]]:
    kids = {i: [] for i in range(1, n + 1)}
    for c in sorted(parent):
        kids[parent[c]].append(c)
    return kids


def random_acyclic(n: int, seed: int = 0, self_join_prob: float = 0.0, chain_bias: float = 0.0):
    """Random acyclic query over ``n`` atoms plus its join-tree GHD.

    Atom ``i`` attaches to an earlier atom (see ``random_tree``), inherits one
    or two of its attributes and adds fresh ones (arity <= 3). With
    ``self_join_prob`` an atom reuses an earlier relation of the same arity.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = random.Random(f"acyclic/{seed}/{n}")
    parent = random_tree(n, rng, chain_bias)
    fresh = iter(f"X{i}" for i in range(10 * n + 10))
    attrs = {1: tuple(next(fresh) for _ in range(rng.randint(1, 3)))}
    for i in range(2, n + 1):
        p = parent[i]
        shared = rng.sample(attrs[p], rng.randint(1, min(2, len(attrs[p]))))
        extra = rng.randint(0 if len(shared) > 1 else 1, 3 - len(shared))
        attrs[i] = tuple(shared) + tuple(next(fresh) for _ in range(extra))
    by_arity: dict[int, list[str]] = {}
    atoms = []
    for i in range(1, n + 1):
        k = len(attrs[i])
        name = f"R{i}"
        if by_arity.get(k) and rng.random() < self_join_prob:
            name = rng.choice(by_arity[k])
        else:
            by_arity.setdefault(k, []).append(name)
        atoms.append(Atom(i, name, attrs[i]))
    q = Query(atoms)
    chi = {i: frozenset(attrs[i]) for i in attrs}
    lam = {i: frozenset({i}) for i in attrs}
    ghd = Ghd.from_children(q, chi, lam, children_of(parent, n), 1)
    return q, ghd


def _chunks(n: int, count: int) -> list[int]:
    base, extra = divmod(n, count)
    return [base + 1] * extra + [base] * (count - extra)


def fixture_ghd(family: str, n: int, group: int = 1, nodes: int | None = None) -> Ghd:
    """Reference decompositions.

    * ``S_n``: depth-1 star rooted at the hub atom.
    * ``C_n``: width-1 chain, depth n-1.
    * ``TC_n``: chain of n/3 triangle nodes, each with two of its three atoms
      in ``lam`` (width 2, the third atom is covered but not assigned).
    * ``C_n_grouped``: chain of ``nodes`` nodes (default ``ceil(n/group)``)
      holding consecutive runs of at most ``group`` chain atoms.
    """
    family = normalize_family(family)
    q = fixture_query(family, n)
    if family == "S_n":
        chi = {i: q.edge(i) for i in range(1, n + 1)}
        lam = {i: frozenset({i}) for i in range(1, n + 1)}
        return Ghd.from_edges(q, chi, lam, [(n, i) for i in range(1, n)], n)
    if family == "C_n":
        group, nodes = 1, n
    if family in ("C_n", "C_n_grouped"):
        if group < 1:
            raise ValueError("group must be >= 1")
        count = nodes if nodes is not None else math.ceil(n / group)
        if not 1 <= count <= n:
            raise ValueError(f"cannot split {n} atoms into {count} nodes")
        sizes = _chunks(n, count)
        if max(sizes) > group:
            raise ValueError(f"{count} nodes of at most {group} atoms cannot hold {n} atoms")
        chi, lam, start = {}, {}, 1
        for j, size in enumerate(sizes, start=1):
            ids = range(start, start + size)
            lam[j] = frozenset(ids)
            chi[j] = frozenset().union(*(q.edge(a) for a in ids))
            start += size
        return Ghd.from_edges(q, chi, lam, [(j, j + 1) for j in range(1, count)], 1)
    chi, lam = {}, {}
    for j in range(1, n // 3 + 1):
        lam[j] = frozenset({3 * j - 2, 3 * j - 1})
        chi[j] = q.edge(3 * j - 2) | q.edge(3 * j - 1)
    return Ghd.from_edges(q, chi, lam, [(j, j + 1) for j in range(1, n // 3)], 1)


def database_input_size(db: Database) -> int:
    return sum(len(r) for r in db.values())
