import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gymjoin.errors import DisconnectedQueryError, ParseError, QueryError, SchemaError
from gymjoin.fixtures import fixture_query, gen_data, gen_fixture, random_acyclic
from gymjoin.query import Atom, Query, bind, hypergraph_of, input_size, left_deep_join, oracle_join, parse_query
from gymjoin.relation import Relation
from tests.conftest import nested_loop_join

EXAMPLE4 = "R1(A,B,C)\nR2(B,F)\nR3(B,C,D)\nR4(C,D,E)\nR5(D,E,G)\n"


def test_hypergraph_of_triangle():
    h = hypergraph_of(fixture_query("TC_n", 3))
    assert h.vertices == {"A0", "A1", "A2"}
    assert [e for _, e in h.edges] == [{"A0", "A1"}, {"A0", "A2"}, {"A1", "A2"}]


def test_hypergraph_single_atom():
    h = hypergraph_of(parse_query("R(A)"))
    assert h.vertices == {"A"} and len(h.edges) == 1


def test_hypergraph_example_query():
    q = parse_query(EXAMPLE4)
    h = hypergraph_of(q)
    assert h.vertices == set("ABCDEFG") and len(h.edges) == 5
    assert set().union(*(e for _, e in h.edges)) == h.vertices
    assert hypergraph_of(parse_query(EXAMPLE4)) == h


def test_parse_query_comments_and_errors():
    q = parse_query("# header\nR(A, B)\n\nS(B,C)\n")
    assert [a.atom_id for a in q.atoms] == [1, 2]
    assert q.to_text() == "R(A,B)\nS(B,C)\n"
    for bad in ["R(A,B", "R()", "R(A,,B)", "", "1R(A)"]:
        with pytest.raises(ParseError):
            parse_query(bad)


def test_disconnected_query_rejected():
    with pytest.raises(DisconnectedQueryError):
        parse_query("R(A,B)\nS(C,D)")


def test_duplicate_atom_ids_rejected():
    with pytest.raises(QueryError):
        Query([Atom(1, "R", ("A",)), Atom(1, "S", ("A",))])


def test_bind_renames_and_selects():
    db = {"E": Relation("E", ("x", "y"), frozenset({(1, 1), (1, 2)}))}
    assert bind(Atom(1, "E", ("A", "A")), db).rows == {(1,)}
    assert bind(Atom(2, "E", ("B", "A")), db).schema == ("B", "A")
    with pytest.raises(SchemaError):
        bind(Atom(3, "E", ("A",)), db)
    with pytest.raises(QueryError):
        bind(Atom(4, "F", ("A",)), db)


def test_oracle_chain_examples():
    q = fixture_query("C_n", 2)
    db = {"R1": Relation("R1", ("a", "b"), frozenset({(1, 2)})), "R2": Relation("R2", ("a", "b"), frozenset({(2, 3)}))}
    assert oracle_join(q, db).rows == {(1, 2, 3)}
    db["R2"] = Relation("R2", ("a", "b"), frozenset({(3, 4)}))
    assert len(oracle_join(q, db)) == 0


def test_oracle_limit():
    q, db = gen_fixture("S_n", 3, seed=0, domain=2, rows=8)
    full = oracle_join(q, db)
    assert len(full) > 1
    assert oracle_join(q, db, limit=len(full)) == full
    with pytest.raises(OverflowError):
        oracle_join(q, db, limit=len(full) - 1)


def test_self_join_uses_each_atom():
    q = parse_query("E(A,B)\nE(B,C)")
    db = {"E": Relation("E", ("s", "t"), frozenset({(1, 2), (2, 3)}))}
    assert oracle_join(q, db).rows == {(1, 2, 3)}
    assert input_size(q, db) == 2


@given(st.integers(0, 10_000), st.sampled_from(["S_n", "C_n", "TC_n", "acyclic"]), st.integers(1, 6))
def test_oracle_equals_left_deep_and_nested_loop(seed, family, n):
    rng = random.Random(seed)
    if family == "acyclic":
        q, _ = random_acyclic(n, seed, self_join_prob=0.3)
    else:
        n = {"S_n": max(2, n), "C_n": n, "TC_n": 3 * (1 + n % 2)}[family]
        q = fixture_query(family, n)
    db = gen_data(q, seed, rng.randint(1, 6), rng.randint(0, 6))
    want = oracle_join(q, db)
    assert want.same_rows(left_deep_join(q, db))
    from gymjoin.query import bind as b

    schema, rows = nested_loop_join([(r.schema, r.rows) for r in (b(a, db) for a in q.atoms)])
    assert want.same_rows(Relation("X", schema, frozenset(rows)))


def test_fixture_shapes():
    c16 = fixture_query("C_n", 16)
    assert c16.n == 16 and c16.attributes == tuple(f"A{i}" for i in range(17))
    assert all(len(a.attrs) == 2 for a in c16.atoms)
    tc = fixture_query("TC_n", 15)
    assert tc.n == 15 and len(tc.attributes) == 11
    s4 = fixture_query("S_n", 4)
    assert [len(a.attrs) for a in s4.atoms] == [2, 2, 2, 3]
    assert s4.atoms[-1].relation == "S" and s4.atoms[-1].atom_id == 4
    for fam, n in [("TC_n", 4), ("S_n", 1), ("C_n", 0)]:
        with pytest.raises(ValueError):
            fixture_query(fam, n)


def test_gen_data_is_seeded():
    q = fixture_query("TC_n", 6)
    assert gen_data(q, 4) == gen_data(q, 4)
    assert gen_data(q, 4) != gen_data(q, 5)
    assert all(len(r) <= 16 and all(1 <= v <= 8 for row in r.rows for v in row) for r in gen_data(q, 4).values())


@given(st.integers(0, 10_000), st.sampled_from(["C_n", "TC_n", "S_n"]))
def test_matching_joins_never_expand(seed, family):
    q = fixture_query(family, 6)
    db = gen_data(q, seed, domain=20, rows=rng_rows(seed), matching=True)
    for a in q.atoms:
        for b in q.atoms:
            if a.atom_id < b.atom_id and a.attr_set & b.attr_set:
                ra, rb = bind(a, db), bind(b, db)
                joined = oracle_join(Query([a, b]), db)
                assert len(joined) <= min(len(ra), len(rb))


def rng_rows(seed):
    return 1 + seed % 20


def test_matching_needs_domain():
    with pytest.raises(ValueError):
        gen_data(fixture_query("C_n", 2), 0, domain=3, rows=5, matching=True)
