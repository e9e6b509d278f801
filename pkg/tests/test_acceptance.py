"""Acceptance criteria 1-11, one test each.

Every test records a ``PASS``/``FAIL criterion N: ...`` line; conftest
prints them at the end of the session.
"""
import math
import os
import random
import subprocess
import sys
import time

import pytest

from gymjoin.bsp import CostLedger, MachineConfig, cost_bound, join_cost_bound, mr_join, mr_semijoin
from gymjoin.engine import check_full_reduction, dym_d, dym_n, gym, idb_instance, serial_yannakakis
from gymjoin.fixtures import children_of, fixture_ghd, fixture_query, gen_data, random_acyclic, random_tree
from gymjoin.ghd import stats, validate_ghd
from gymjoin.query import oracle_join
from gymjoin.relation import Relation
from gymjoin.transform import log_gta, log_gta_run, log_round_bound, select_nodes, tree_stats

pytestmark = pytest.mark.acceptance

RESULTS = []

JOIN_SLACK = 2
SEMIJOIN_SLACK = 4
INSTANCES_PER_FAMILY = 500


def verdict(n, ok, detail):
    RESULTS.append(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    assert ok, detail


# -- criteria 1 and 5: engines on randomized small instances ---------------


def _instance(family, i):
    rng = random.Random(f"acceptance/{family}/{i}")
    domain = rng.randint(2, 8)
    if family == "acyclic":
        n = rng.randint(1, 8)
        q, d = random_acyclic(n, i, self_join_prob=0.25, chain_bias=rng.random())
    else:
        n = {"S_n": rng.randint(2, 8), "C_n": rng.randint(1, 8), "TC_n": rng.choice([3, 6])}[family]
        q, d = fixture_query(family, n), fixture_ghd(family, n)
    # past 4 atoms, at most 2*domain rows keeps the per-hop fan-out <= 2
    rows = rng.randint(1, 32 if n <= 4 else min(32, 2 * domain))
    db = gen_data(q, i, domain=domain, rows=rows)
    return q, d, db, MachineConfig(M=rng.choice([8, 16, 32]), seed=i)


def _check_instance(q, d, db, cfg):
    """Mismatches (criterion 1) and reduction failures (criterion 5) of one instance."""
    expected = oracle_join(q, db)
    reports = [gym(q, d, db, cfg), gym(q, d, db, cfg, mode="dym-n")]
    if d.width == 1 and d.is_complete():
        wq, wd, wdb = q, d, db
    else:
        # no width-1 GHD exists: the other engines run on the materialized query
        wq, wdb, wd = idb_instance(q, d, db)
    reports += [serial_yannakakis(wq, wd, wdb), dym_n(wq, wd, wdb, cfg), dym_d(wq, wd, wdb, cfg)]
    mismatch, unreduced = [], []
    for rep in reports:
        if not rep.output.reorder(expected.schema).same_rows(expected):
            mismatch.append(rep.engine)
        if not check_full_reduction(q, db, rep.reduced) or rep.max_intermediate > len(expected):
            unreduced.append(rep.engine)
    return mismatch, unreduced


@pytest.fixture(scope="module")
def engine_runs():
    start = time.perf_counter()
    out = {}
    for family in ("acyclic", "S_n", "C_n", "TC_n"):
        bad_eq, bad_red = [], []
        for i in range(INSTANCES_PER_FAMILY):
            mismatch, unreduced = _check_instance(*_instance(family, i))
            if mismatch:
                bad_eq.append((i, mismatch))
            if unreduced:
                bad_red.append((i, unreduced))
        out[family] = (bad_eq, bad_red)
    return out, time.perf_counter() - start


def test_criterion_01_oracle_equivalence(engine_runs):
    runs, elapsed = engine_runs
    bad = {f: v[0][:3] for f, v in runs.items() if v[0]}
    verdict(
        1,
        not bad and elapsed < 60,
        f"{INSTANCES_PER_FAMILY} instances x 4 families, all engines equal oracle_join; "
        f"mismatches={bad or 'none'}; {elapsed:.1f}s (limit 60s)",
    )


def test_criterion_05_full_reduction(engine_runs):
    runs, _ = engine_runs
    bad = {f: v[1][:3] for f, v in runs.items() if v[1]}
    verdict(5, not bad, f"post-semijoin states dangling-free and join intermediates <= OUT; failures={bad or 'none'}")


# -- criterion 2 -----------------------------------------------------------


def test_criterion_02_table_stats():
    wrong = []
    for n in range(2, 21):
        for family, want in (("S_n", (1, 1, 1)), ("C_n", (1, n - 1, 1))):
            s = stats(fixture_ghd(family, n))
            if (s.w, s.d, s.iw) != want:
                wrong.append((family, n, s.w, s.d, s.iw))
    # TC_3 is a single node with no adjacent pair, so the family starts at 6
    for n in range(6, 31, 3):
        s = stats(fixture_ghd("TC_n", n))
        if (s.w, s.d, s.iw) != (2, n // 3 - 1, 1):
            wrong.append(("TC_n", n, s.w, s.d, s.iw))
    verdict(2, not wrong, f"S_n/C_n n=2..20, TC_n n=6..30 report the table (w, d, iw); wrong={wrong or 'none'}")


# -- criterion 3 -----------------------------------------------------------


def test_criterion_03_tc15_log_gta():
    d = fixture_ghd("TC_n", 15)
    out = log_gta(d)
    ok = validate_ghd(out.query, out).ok and out.width <= 3 and out.depth <= 2
    verdict(3, ok, f"log_gta on TC_15: valid={validate_ghd(out.query, out).ok}, width={out.width}, depth={out.depth}")


# -- criterion 4 -----------------------------------------------------------


def test_criterion_04_op_counts():
    q = fixture_query("C_n", 16)
    db = gen_data(q, 0)
    cfg = MachineConfig(M=16)
    chain = fixture_ghd("C_n", 16)
    grouped = fixture_ghd("C_n_grouped", 16, group=3, nodes=7)

    def pair(rep):
        return rep.op_counts["semijoins"], rep.op_counts["joins"]

    got = {
        "dym_n C_16": pair(dym_n(q, chain, db, cfg)),
        "gym C_16": pair(gym(q, chain, db, cfg, mode="dym-n")),
        "gym 7-node": pair(gym(q, grouped, db, cfg, mode="dym-n")),
    }
    want = {"dym_n C_16": (30, 15), "gym C_16": (30, 15), "gym 7-node": (12, 6)}
    verdict(4, got == want and len(grouped) == 7 and grouped.width == 3, f"(semijoins, joins) {got}")


# -- criteria 6 and 7: random tree shapes ----------------------------------


def _random_shapes(count, lo, hi, tag):
    for i in range(count):
        rng = random.Random(f"{tag}/{i}")
        n = rng.randint(lo, hi)
        yield n, children_of(random_tree(n, rng, chain_bias=rng.random()), n)


def test_criterion_06_leaf_unique_inequality():
    bad = []
    for n, children in _random_shapes(1000, 2, 500, "leaf-unique"):
        big_n, leaves, uniques = tree_stats(children)
        if big_n != n or 4 * leaves + uniques < n + 2:
            bad.append((n, leaves, uniques))
    verdict(6, not bad, f"4L + U >= N + 2 on 1000 random trees, N in [2, 500]; violations={bad[:3] or 'none'}")


def test_criterion_07_selection():
    bad = []
    for n, children in _random_shapes(1000, 2, 500, "selection"):
        leaves, uniques = select_nodes(children, 1)
        picked = set(uniques)
        adjacent = any(children[u][0] in picked for u in uniques)
        if len(leaves) + len(uniques) < math.ceil(n / 4) or adjacent:
            bad.append((n, len(leaves), len(uniques), adjacent))
    verdict(7, not bad, f"|L'| + |U'| >= ceil(N/4) and U' non-adjacent on 1000 random trees; violations={bad[:3] or 'none'}")


# -- criterion 8 -----------------------------------------------------------


def _log_gta_cases():
    for family, sizes in (("S_n", (2, 64, 512)), ("C_n", (2, 64, 512)), ("TC_n", (15, 96, 510))):
        for n in sizes:
            yield f"{family}:{n}", fixture_ghd(family, n)
    for n in (64, 512):
        yield f"C_n_grouped:{n}:3", fixture_ghd("C_n_grouped", n, group=3)
    for i in range(150):
        rng = random.Random(f"loggta/{i}")
        n = rng.randint(1, 512)
        yield f"random:{n}:{i}", random_acyclic(n, i, self_join_prob=0.1, chain_bias=rng.random())[1]


def test_criterion_08_log_gta_bounds():
    start = time.perf_counter()
    bad, count = [], 0
    for name, d in _log_gta_cases():
        count += 1
        iw = stats(d).iw
        res = log_gta_run(d)
        out = res.ghd
        true_heights = out.heights()
        problems = []
        if res.rounds > log_round_bound(len(d)):
            problems.append(f"rounds {res.rounds}")
        if out.width > max(d.width, 3 * iw):
            problems.append(f"width {out.width}")
        if any(true_heights[v] != h for v, h in res.heights.items()):
            problems.append("heights")
        if not validate_ghd(out.query, out).ok:
            problems.append("invalid")
        if problems:
            bad.append((name, problems))
    elapsed = time.perf_counter() - start
    verdict(
        8,
        not bad and elapsed < 30,
        f"{count} GHDs up to 512 nodes: rounds <= ceil(log_4/3 N)+1, width <= max(w, 3iw), heights exact, valid; "
        f"failures={bad[:3] or 'none'}; {elapsed:.1f}s (limit 30s)",
    )


# -- criterion 9 -----------------------------------------------------------


def _potential_cases():
    # the potential depends only on tree shape; matching data keeps outputs small
    cfg = MachineConfig(M=16)

    def data(q, seed):
        return gen_data(q, seed, domain=8, rows=8, matching=True)

    for family, sizes in (("S_n", (2, 5, 9, 17, 33)), ("C_n", (1, 2, 8, 16, 33))):
        for n in sizes:
            q = fixture_query(family, n)
            yield f"{family}:{n}", dym_d(q, fixture_ghd(family, n), data(q, n), cfg).potentials
    for family, n, kw in (("TC_n", 15, {}), ("TC_n", 30, {}), ("C_n_grouped", 16, {"group": 3, "nodes": 7})):
        q = fixture_query(family, n)
        d = fixture_ghd(family, n, **kw)
        yield f"gym {family}:{n}", gym(q, d, data(q, n), cfg).potentials
        yield f"gym {family}:{n} loggta", gym(q, log_gta(d), data(q, n), cfg).potentials
    for i in range(40):
        q, d = random_acyclic(1 + i % 30, i, chain_bias=(i % 7) / 6)
        yield f"random:{i}", dym_d(q, d, data(q, i), cfg).potentials


def test_criterion_09_potential_halves():
    bad, count = [], 0
    for name, pots in _potential_cases():
        count += 1
        if any(2 * b > a for a, b in zip(pots, pots[1:])):
            bad.append((name, pots))
    verdict(9, not bad, f"X(T) at least halves per upward iteration on {count} runs; violations={bad[:3] or 'none'}")


# -- criterion 10 ----------------------------------------------------------


def _rand_rel(rng, name, schema, size, domain):
    return Relation(name, schema, frozenset(tuple(rng.randint(1, domain) for _ in schema) for _ in range(size)))


def test_criterion_10_simulator_bounds():
    eps = 2.0
    schemas = [("A", "B"), ("B", "C"), ("C", "D")]
    bad_join, bad_semi, over = [], [], []
    worst_join = worst_semi = 0.0
    for i in range(200):
        rng = random.Random(f"simulator/{i}")
        m = rng.choice([16, 32, 64])
        cfg = MachineConfig(M=m, epsilon=eps, seed=i)
        z = rng.randint(1, 3)
        cap = {1: m * m, 2: 4 * m, 3: 2 * m}[z]
        rs = [_rand_rel(rng, f"R{k}", schemas[k], rng.randint(1, cap), rng.randint(4, 40)) for k in range(z)]
        ledger = CostLedger()
        out = mr_join(rs, cfg, ledger)
        bound = join_cost_bound([len(r) for r in rs], len(out), m)
        worst_join = max(worst_join, ledger.communicated / bound)
        if ledger.communicated > JOIN_SLACK * bound:
            bad_join.append((i, ledger.communicated, bound))
        over += [i] if ledger.max_load > m else []

        # sizes follow the model assumption M = Theta(IN^(1/eps))
        x = rng.randint(int(m**eps) // 4, int(m**eps))
        r_size = rng.randint(1, x - 1)
        domain = rng.randint(2, max(2, x // 2))
        s = _rand_rel(rng, "S", ("A", "B"), x - r_size, domain)
        r = _rand_rel(rng, "R", ("B", "C"), r_size, domain)
        ledger = CostLedger()
        mr_semijoin(s, r, cfg, ledger)
        b = cost_bound(len(r) + len(s), m)
        worst_semi = max(worst_semi, ledger.communicated / b)
        if len(r) <= m**eps and ledger.communicated > SEMIJOIN_SLACK * b:
            bad_semi.append((i, len(s), len(r), m, ledger.communicated, b))
        over += [i] if ledger.max_load > m else []

    # informational: near X ~ M the quadratic bound is below the cost of reading the input
    near = 0.0
    for i in range(50):
        rng = random.Random(f"simulator-near/{i}")
        m = rng.choice([8, 16, 32])
        x = rng.randint(m, 4 * m - 1)
        s = _rand_rel(rng, "S", ("A", "B"), x // 2, 6)
        r = _rand_rel(rng, "R", ("B", "C"), x - x // 2, 6)
        ledger = CostLedger()
        mr_semijoin(s, r, MachineConfig(M=m, seed=i), ledger)
        near = max(near, ledger.communicated / cost_bound(len(r) + len(s), m))
    RESULTS.append(f"INFO criterion 10: semijoin comm / B for |R|+|S| in [M, 4M) peaks at {near:.2f} (not asserted)")

    verdict(
        10,
        not (bad_join or bad_semi or over),
        f"200 inputs: join comm/bound max {worst_join:.2f} (slack {JOIN_SLACK}), semijoin comm/B max {worst_semi:.2f} "
        f"(slack {SEMIJOIN_SLACK}), overloaded reducers={over or 'none'}; "
        f"join failures={bad_join[:3] or 'none'}, semijoin failures={bad_semi[:3] or 'none'}",
    )


# -- criterion 11 ----------------------------------------------------------


def _cli(args, cwd, hash_seed):
    env = dict(os.environ, PYTHONHASHSEED=str(hash_seed))
    env.pop("GYM_SEED", None)
    return subprocess.run([sys.executable, "-m", "gymjoin", *args], cwd=cwd, env=env, capture_output=True, check=False)


def test_criterion_11_determinism(tmp_path):
    commands = {
        "validate": ["validate", "--fixture", "TC_n:15", "--report", "report.json"],
        "transform-loggta": ["transform", "--fixture", "TC_n:15", "--transform", "loggta", "--out", "g.json", "--trace", "t.jsonl", "--report", "report.json"],
        "transform-cgta": ["transform", "--fixture", "C_n:64", "--transform", "cgta:2", "--out", "g.json", "--report", "report.json"],
        "generate": ["generate", "--fixture", "S_n:6", "--seed", "4", "--outdir", "gen"],
    }
    for engine in ("serial", "dym-n", "dym-d", "gym"):
        fixture = "C_n:12" if engine != "gym" else "TC_n:9"
        commands[f"run-{engine}"] = [
            "run", "--fixture", fixture, "--engine", engine, "--seed", "9", "--memory", "8",
            "--check-oracle", "--out", "out.tsv", "--report", "report.json",
        ]  # fmt: skip
    diffs = []
    for name, args in commands.items():
        snapshots = []
        for attempt, hash_seed in enumerate((1, 2)):
            cwd = tmp_path / f"{name}-{attempt}"
            cwd.mkdir()
            res = _cli(args, cwd, hash_seed)
            files = {p.relative_to(cwd).as_posix(): p.read_bytes() for p in sorted(cwd.rglob("*")) if p.is_file()}
            snapshots.append((res.returncode, res.stdout, files))
        if snapshots[0] != snapshots[1] or snapshots[0][0] != 0 or not snapshots[0][2]:
            diffs.append(name)
    verdict(11, not diffs, f"{len(commands)} CLI commands run twice (different hash seeds) give byte-identical files; differing={diffs or 'none'}")


def test_results_cover_every_criterion():
    # keeps the summary honest if a criterion test is renamed away
    names = [n for n in globals() if n.startswith("test_criterion_")]
    assert sorted(int(n.split("_")[2]) for n in names) == list(range(1, 12))
