"""Conjunctive queries, their hypergraphs, and the brute-force join oracle."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Sequence

from gymjoin.errors import DisconnectedQueryError, ParseError, QueryError, SchemaError
from gymjoin.relation import Relation, serial_join

Database = Mapping[str, Relation]


@dataclass(frozen=True)
class Atom:
    """One occurrence of a relation in a query.

    ``relation`` names an entry of the database; ``attrs`` renames its
    columns positionally. Two atoms may name the same relation (self-join).
    """

    atom_id: int
    relation: str
    attrs: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "attrs", tuple(self.attrs))
        if not self.attrs:
            raise QueryError(f"atom {self.relation} has no attributes")
        object.__setattr__(self, "_attr_set", frozenset(self.attrs))

    @property
    def attr_set(self) -> frozenset:
        return self._attr_set

    def __str__(self):
        return f"{self.relation}({','.join(self.attrs)})"


@dataclass(frozen=True)
class Hypergraph:
    vertices: frozenset
    edges: tuple  # ((atom_id, frozenset of attrs), ...)


class Query:
    """A full conjunctive query: the natural join of its atoms."""

    def __init__(self, atoms: Sequence[Atom]):
        atoms = tuple(atoms)
        if not atoms:
            raise QueryError("empty query")
        ids = [a.atom_id for a in atoms]
        if len(set(ids)) != len(ids):
            raise QueryError(f"duplicate atom ids in {ids}")
        self.atoms = atoms
        self._by_id = {a.atom_id: a for a in atoms}
        seen: dict = {}
        for a in atoms:
            for x in a.attrs:
                seen.setdefault(x, []).append(a.atom_id)
        self.attributes = tuple(seen)
        self._holders = {x: tuple(sorted(set(ids))) for x, ids in seen.items()}
        self._check_connected()

    def atoms_with(self, attr) -> tuple:
        """Sorted ids of the atoms that contain ``attr``."""
        return self._holders.get(attr, ())

    def _check_connected(self):
        reached = {self.atoms[0].atom_id}
        frontier = set(self.atoms[0].attrs)
        grew = True
        while grew:
            grew = False
            for a in self.atoms:
                if a.atom_id not in reached and frontier & a.attr_set:
                    reached.add(a.atom_id)
                    frontier |= a.attr_set
                    grew = True
        if len(reached) != len(self.atoms):
            missing = sorted(set(self._by_id) - reached)
            raise DisconnectedQueryError(f"query hypergraph is disconnected; atoms {missing} unreachable")

    @property
    def n(self) -> int:
        return len(self.atoms)

    @property
    def atom_ids(self) -> tuple[int, ...]:
        return tuple(a.atom_id for a in self.atoms)

    def atom(self, atom_id: int) -> Atom:
        return self._by_id[atom_id]

    def edge(self, atom_id: int) -> frozenset:
        return self._by_id[atom_id].attr_set

    def relation_names(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(a.relation for a in self.atoms))

    def to_text(self) -> str:
        return "".join(f"{a}\n" for a in self.atoms)

    def __eq__(self, other):
        return isinstance(other, Query) and self.atoms == other.atoms

    def __hash__(self):
        return hash(self.atoms)

    def __repr__(self):
        return "Query(" + " ⋈ ".join(str(a) for a in self.atoms) + ")"


def hypergraph_of(q: Query) -> Hypergraph:
    edges = tuple((a.atom_id, a.attr_set) for a in q.atoms)
    return Hypergraph(frozenset(q.attributes), edges)


_ATOM_RE = re.compile(r"^\s*([A-Za-z_][\w]*)\s*\(\s*([^()]*?)\s*\)\s*$")


def parse_query(text: str) -> Query:
    """Parse one ``Name(A,B,...)`` atom per line; ``#`` starts a comment line.

    Atoms are numbered 1..n in line order.
    """
    atoms = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _ATOM_RE.match(stripped)
        if not m:
            raise ParseError(f"line {lineno}: expected Name(Attr,...), got {stripped!r}")
        attrs = [x.strip() for x in m.group(2).split(",")] if m.group(2) else []
        if not attrs or any(not re.fullmatch(r"[A-Za-z_][\w]*", x) for x in attrs):
            raise ParseError(f"line {lineno}: bad attribute list {m.group(2)!r}")
        atoms.append(Atom(len(atoms) + 1, m.group(1), tuple(attrs)))
    if not atoms:
        raise ParseError("query text contains no atoms")
    return Query(atoms)


def bind(atom: Atom, db: Database) -> Relation:
    """The atom's relation with columns renamed to the atom's attributes.

    An attribute repeated inside one atom acts as an equality selection.
    """
    try:
        base = db[atom.relation]
    except KeyError:
        raise QueryError(f"no data for relation {atom.relation!r}") from None
    if base.arity != len(atom.attrs):
        raise SchemaError(f"{atom} has arity {len(atom.attrs)} but {atom.relation} has arity {base.arity}")
    schema = tuple(dict.fromkeys(atom.attrs))
    name = f"{atom.relation}#{atom.atom_id}"
    if len(schema) == len(atom.attrs):
        return Relation(name, schema, base.rows)
    first = {x: atom.attrs.index(x) for x in schema}
    rows = frozenset(
        tuple(r[first[x]] for x in schema)
        for r in base.rows
        if all(r[i] == r[first[x]] for i, x in enumerate(atom.attrs))
    )
    return Relation(name, schema, rows)


def input_size(q: Query, db: Database) -> int:
    """IN: total tuples over the distinct relations the query reads."""
    return sum(len(db[name]) for name in q.relation_names())


def connected_order(q: Query) -> list[Atom]:
    """Atoms reordered so each one shares an attribute with an earlier one."""
    order = [q.atoms[0]]
    seen = set(q.atoms[0].attrs)
    rest = list(q.atoms[1:])
    while rest:
        for i, a in enumerate(rest):
            if seen & a.attr_set:
                order.append(rest.pop(i))
                seen |= a.attr_set
                break
    return order


def oracle_join(q: Query, db: Database, limit: int | None = None) -> Relation:
    """Full join by backtracking over atoms, one row at a time.

    Deliberately shares no code with the hash-join kernels so it can serve
    as ground truth for them. ``limit`` caps the output size; exceeding it
    raises ``OverflowError``.
    """
    order = connected_order(q)
    bound = [(a, bind(a, db)) for a in order]
    out_attrs = q.attributes
    results = []
    assignment: dict = {}

    def extend(depth):
        if depth == len(bound):
            results.append(tuple(assignment[x] for x in out_attrs))
            if limit is not None and len(results) > limit:
                raise OverflowError("oracle output exceeds limit")
            return
        rel = bound[depth][1]
        for row in rel.rows:
            added = []
            ok = True
            for x, v in zip(rel.schema, row):
                have = assignment.get(x)
                if have is None:
                    assignment[x] = v
                    added.append(x)
                elif have != v:
                    ok = False
                    break
            if ok:
                extend(depth + 1)
            for x in added:
                del assignment[x]

    extend(0)
    return Relation("OUT", out_attrs, frozenset(results))


def left_deep_join(q: Query, db: Database) -> Relation:
    """Second oracle: fold the hash join over atoms in connected order."""
    rels = [bind(a, db) for a in connected_order(q)]
    return serial_join(rels, name="OUT").reorder(q.attributes)
