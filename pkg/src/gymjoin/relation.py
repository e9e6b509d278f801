"""Relations, multisets, and the serial relational operators.

Rows are tuples of ints. A relation's schema is an ordered tuple of
attribute names; set semantics is enforced by storing rows in a frozenset.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from gymjoin import kernels
from gymjoin.errors import SchemaError

Row = tuple  # tuple[int, ...]


@dataclass(frozen=True)
class Relation:
    name: str
    schema: tuple[str, ...]
    rows: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        schema = tuple(self.schema)
        if len(set(schema)) != len(schema):
            raise SchemaError(f"relation {self.name!r} repeats an attribute: {schema}")
        rows = self.rows if isinstance(self.rows, frozenset) else frozenset(tuple(r) for r in self.rows)
        arity = len(schema)
        for r in rows:
            if len(r) != arity:
                raise SchemaError(f"row {r} of {self.name!r} does not match arity {arity}")
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def unit(cls, name: str = "UNIT") -> Relation:
        """The zero-attribute relation holding the empty row (identity for join)."""
        return cls(name, (), frozenset({()}))

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def arity(self) -> int:
        return len(self.schema)

    def sorted_rows(self) -> list[Row]:
        return sorted(self.rows)

    def renamed(self, name: str) -> Relation:
        return Relation(name, self.schema, self.rows)

    def reorder(self, schema: Sequence[str]) -> Relation:
        """Same rows with columns permuted into ``schema`` order."""
        schema = tuple(schema)
        if schema == self.schema:
            return self
        if set(schema) != set(self.schema) or len(schema) != len(self.schema):
            raise SchemaError(f"cannot reorder {self.schema} into {schema}")
        idx = [self.schema.index(a) for a in schema]
        return Relation(self.name, schema, frozenset(kernels.project(list(self.rows), idx)))

    def project(self, attrs: Sequence[str], name: str | None = None) -> Relation:
        attrs = tuple(attrs)
        missing = set(attrs) - set(self.schema)
        if missing:
            raise SchemaError(f"{sorted(missing)} not in schema {self.schema}")
        idx = [self.schema.index(a) for a in attrs]
        return Relation(name or self.name, attrs, frozenset(kernels.project(list(self.rows), idx)))

    def same_rows(self, other: Relation) -> bool:
        """Set equality of rows, up to column order."""
        if set(self.schema) != set(other.schema):
            return False
        return self.rows == other.reorder(self.schema).rows


@dataclass(frozen=True)
class Multiset:
    """Rows with duplicates, each occurring at most ``dup_bound`` times."""

    schema: tuple[str, ...]
    rows: tuple
    dup_bound: int

    def __post_init__(self):
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        if self.dup_bound < 1:
            raise ValueError("dup_bound must be a positive integer")
        arity = len(self.schema)
        for r in self.rows:
            if len(r) != arity:
                raise SchemaError(f"row {r} does not match arity {arity}")
        if self.rows:
            worst = max(Counter(self.rows).values())
            if worst > self.dup_bound:
                raise ValueError(f"a row occurs {worst} times, above dup_bound {self.dup_bound}")

    def __len__(self) -> int:
        return len(self.rows)


def _join_plan(left: Sequence[str], right: Sequence[str]):
    shared = [a for a in left if a in right]
    lkey = [left.index(a) for a in shared]
    rkey = [right.index(a) for a in shared]
    rrest = [i for i, a in enumerate(right) if a not in left]
    schema = tuple(left) + tuple(right[i] for i in rrest)
    return lkey, rkey, rrest, schema


def join_rows(left_schema, left_rows, right_schema, right_rows):
    """Natural join of raw row lists; returns ``(schema, rows)``."""
    lkey, rkey, rrest, schema = _join_plan(left_schema, right_schema)
    return schema, kernels.hash_join(list(left_rows), list(right_rows), lkey, rkey, rrest)


def serial_join(rs: Sequence[Relation], name: str = "JOIN") -> Relation:
    """Natural join; output columns in order of first appearance."""
    if not rs:
        raise ValueError("serial_join needs at least one relation")
    schema, rows = rs[0].schema, list(rs[0].rows)
    for r in rs[1:]:
        schema, rows = join_rows(schema, rows, r.schema, r.rows)
    return Relation(name, schema, frozenset(rows))


def semijoin_rows(s_schema, s_rows, r_schema, r_rows):
    shared = [a for a in s_schema if a in r_schema]
    if not shared:
        return list(s_rows) if r_rows else []
    skey = [s_schema.index(a) for a in shared]
    rkey = [r_schema.index(a) for a in shared]
    return kernels.semijoin(list(s_rows), skey, list(r_rows), rkey)


def serial_semijoin(s: Relation, r: Relation) -> Relation:
    """``s ⋉ r``: rows of ``s`` whose shared-attribute projection occurs in ``r``."""
    return Relation(s.name, s.schema, frozenset(semijoin_rows(s.schema, s.rows, r.schema, r.rows)))


def serial_intersect(r: Relation, s: Relation) -> Relation:
    if set(r.schema) != set(s.schema) or len(r.schema) != len(s.schema):
        raise SchemaError(f"cannot intersect {r.schema} with {s.schema}")
    return Relation(r.name, r.schema, r.rows & s.reorder(r.schema).rows)
