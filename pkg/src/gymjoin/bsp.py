"""Tuple-based MapReduce simulator with exact round and communication counts.

Each primitive maps tuples to virtual reducers that can hold at most ``M``
tuples. Communication per round is the number of tuples mapped to reducers
plus the number of tuples the reducers output. Only nonempty reducers are
materialized, so reducer index spaces such as ``|S|^2`` cost nothing.

Parallel composition: inside ``with ledger.parallel():`` every primitive
call (or ``branch()`` block) starts at the same round, so their k-th rounds
are charged as one. ``barrier(ledger)`` closes a region opened with
``ledger.begin_parallel()``.
"""
from __future__ import annotations

import functools
import itertools
import math
import random
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Sequence

from gymjoin import kernels
from gymjoin.errors import SchemaError, SimulatorAbort
from gymjoin.relation import Multiset, Relation, join_rows, semijoin_rows


@dataclass(frozen=True)
class MachineConfig:
    M: int
    epsilon: float = 2.0
    seed: int = 0
    bucket_cap: int = 2**20

    def __post_init__(self):
        if self.M < 2:
            raise ValueError("memory M must be at least 2 tuples")
        if self.epsilon <= 1:
            raise ValueError("epsilon must exceed 1")


@dataclass
class RoundRecord:
    index: int
    tuples_in: int = 0
    tuples_out: int = 0
    reducers: int = 0
    max_load: int = 0
    ops: list = field(default_factory=list)

    def to_json_obj(self) -> dict:
        return {
            "round": self.index,
            "tuples_in": self.tuples_in,
            "tuples_out": self.tuples_out,
            "reducers": self.reducers,
            "max_load": self.max_load,
            "ops": self.ops,
        }


class _Branch:
    def __init__(self, cursor):
        self.cursor = cursor


class _Parallel:
    def __init__(self, start):
        self.start = start
        self.end = start


class CostLedger:
    def __init__(self):
        self.per_round: list[RoundRecord] = []
        self.communicated = 0
        self.aborted = False
        self.warnings: list[str] = []
        self._stack: list = []
        self._ops = 0

    @property
    def rounds(self) -> int:
        return len(self.per_round)

    @property
    def max_load(self) -> int:
        return max((r.max_load for r in self.per_round), default=0)

    def next_stream(self, seed: int) -> random.Random:
        """Independent random stream for the next primitive call."""
        self._ops += 1
        return random.Random(f"{seed}/{self._ops}")

    def next_hash_seed(self, seed: int) -> int:
        return self.next_stream(seed).getrandbits(64)

    # round placement

    def _slot(self) -> int:
        if not self._stack:
            return len(self.per_round)
        top = self._stack[-1]
        idx = top.cursor
        top.cursor += 1
        return idx

    def record(self, op: str, tuples_in: int, tuples_out: int, reducers: int, max_load: int):
        if self._stack and isinstance(self._stack[-1], _Parallel):
            with self.branch():
                return self.record(op, tuples_in, tuples_out, reducers, max_load)
        idx = self._slot()
        if idx == len(self.per_round):
            self.per_round.append(RoundRecord(idx))
        r = self.per_round[idx]
        r.tuples_in += tuples_in
        r.tuples_out += tuples_out
        r.reducers += reducers
        r.max_load = max(r.max_load, max_load)
        r.ops.append(op)
        self.communicated += tuples_in + tuples_out

    def _cursor(self) -> int:
        if not self._stack:
            return len(self.per_round)
        top = self._stack[-1]
        return top.start if isinstance(top, _Parallel) else top.cursor

    @contextmanager
    def branch(self):
        """A sequential strand; inside a parallel region it starts at the region's start."""
        top = self._stack[-1] if self._stack else None
        if not isinstance(top, _Parallel):
            yield
            return
        b = _Branch(top.start)
        self._stack.append(b)
        try:
            yield
        finally:
            self._stack.pop()
            top.end = max(top.end, b.cursor)

    def begin_parallel(self):
        self._stack.append(_Parallel(self._cursor()))

    def end_parallel(self):
        if not self._stack or not isinstance(self._stack[-1], _Parallel):
            raise RuntimeError("barrier without a matching parallel region")
        par = self._stack.pop()
        if self._stack and isinstance(self._stack[-1], _Branch):
            self._stack[-1].cursor = par.end

    @contextmanager
    def parallel(self):
        self.begin_parallel()
        try:
            yield self
        finally:
            self.end_parallel()

    def snapshot(self) -> tuple[int, int]:
        return self.rounds, self.communicated

    def to_json_obj(self) -> dict:
        return {
            "rounds": self.rounds,
            "communicated": self.communicated,
            "aborted": self.aborted,
            "per_round": [r.to_json_obj() for r in self.per_round],
        }


def barrier(ledger: CostLedger):
    """End the parallel region opened by ``ledger.begin_parallel()``."""
    ledger.end_parallel()


def cost_bound(x: float, M: int) -> float:
    """B(X, M) = X^2 / M."""
    return x * x / M


def join_cost_bound(sizes: Sequence[int], out: int, M: int) -> float:
    """z^z (sum |R_i|)^z / M^(z-1) + |out|."""
    z = len(sizes)
    return z**z * sum(sizes) ** z / M ** (z - 1) + out


def _strand(fn):
    """Run a primitive as one sequential strand of the enclosing parallel region."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        ledger = kwargs.get("ledger") or next(a for a in args if isinstance(a, CostLedger))
        with ledger.branch():
            return fn(*args, **kwargs)

    return wrapper


def _check_load(ledger: CostLedger, cfg: MachineConfig, op: str, load: int):
    if load > cfg.M:
        ledger.aborted = True
        raise SimulatorAbort(f"{op}: a reducer received {load} tuples with memory {cfg.M}", ledger)


def _groups(rows: list, size: int) -> list[list]:
    return [rows[i : i + size] for i in range(0, len(rows), size)]


@_strand
def mr_join(rs: Sequence[Relation], cfg: MachineConfig, ledger: CostLedger, name: str = "JOIN") -> Relation:
    """One-round join: each relation is cut into groups of floor(M/z) tuples
    and every combination of one group per relation meets at one reducer."""
    z = len(rs)
    if z < 1:
        raise ValueError("mr_join needs at least one relation")
    size = cfg.M // z
    if size < 1:
        raise ValueError(f"memory {cfg.M} cannot hold one tuple from each of {z} relations")
    groups = [_groups(r.sorted_rows(), size) for r in rs]
    counts = [len(g) for g in groups]
    tuples_in = 0
    for i, r in enumerate(rs):
        others = math.prod(counts[:i] + counts[i + 1 :])
        tuples_in += len(r) * others
    out = set()
    max_load = 0
    reducers = 0
    for combo in itertools.product(*groups):
        reducers += 1
        load = sum(len(g) for g in combo)
        max_load = max(max_load, load)
        _check_load(ledger, cfg, "join", load)
        schema, rows = rs[0].schema, combo[0]
        for r, g in zip(rs[1:], combo[1:]):
            schema, rows = join_rows(schema, rows, r.schema, g)
            if not rows:
                break
        out.update(rows)
    schema = tuple(dict.fromkeys(a for r in rs for a in r.schema))
    ledger.record("join", tuples_in, len(out), reducers, max_load)
    return Relation(name, schema, frozenset(out))


def _reduce_round(ledger, cfg, op, buckets: dict) -> dict:
    loads = [len(v) for v in buckets.values()]
    max_load = max(loads, default=0)
    _check_load(ledger, cfg, op, max_load)
    survivors = {k: list(dict.fromkeys(v)) for k, v in buckets.items()}
    ledger.record(op, sum(loads), sum(len(v) for v in survivors.values()), len(buckets), max_load)
    return survivors


def dedup_round_bound(k: int, M: int) -> int:
    fan_in = max(2, math.isqrt(M))
    span, levels = k * k, 0
    while span > 1:
        span = -(-span // fan_in)
        levels += 1
    return 1 + levels


@_strand
def mr_dedup(s: Multiset, cfg: MachineConfig, ledger: CostLedger, name: str = "DEDUP") -> Relation:
    """Remove duplicates from a multiset whose rows repeat at most ``k`` times.

    Round 1 sends each row to reducer (h(row), random second index below k^2);
    later rounds merge floor(sqrt(M)) reducers sharing a first index until one
    reducer per first index is left. Every reducer drops duplicates locally.
    """
    k = s.dup_bound
    n = len(s)
    rng = ledger.next_stream(cfg.seed)
    hseed = rng.getrandbits(64)
    nbuckets = max(1, min(n * n, cfg.bucket_cap))
    span = k * k
    firsts = kernels.bucket_rows(list(s.rows), hseed, nbuckets)
    buckets: dict = {}
    for row, b in zip(s.rows, firsts):
        buckets.setdefault((b, rng.randrange(span)), []).append(row)
    current = _reduce_round(ledger, cfg, "dedup", buckets)
    fan_in = max(2, math.isqrt(cfg.M))
    while span > 1:
        span = -(-span // fan_in)
        merged: dict = {}
        for (b, j), rows in sorted(current.items()):
            merged.setdefault((b, j // fan_in), []).extend(rows)
        current = _reduce_round(ledger, cfg, "dedup-merge", merged)
    rows = frozenset(r for v in current.values() for r in v)
    return Relation(name, s.schema, rows)


@_strand
def mr_semijoin(s: Relation, r: Relation, cfg: MachineConfig, ledger: CostLedger) -> Relation:
    """``s`` semijoin ``r``: a join-style round of local semijoins, then dedup."""
    size = max(1, cfg.M // 2)
    if not r.rows or not s.rows:
        ledger.record("semijoin", 0, 0, 0, 0)
        return Relation(s.name, s.schema, frozenset())
    s_groups = _groups(s.sorted_rows(), size)
    r_groups = _groups(r.sorted_rows(), size)
    g_s, g_r = len(s_groups), len(r_groups)
    partial = []
    max_load = 0
    for sg in s_groups:
        for rg in r_groups:
            load = len(sg) + len(rg)
            max_load = max(max_load, load)
            _check_load(ledger, cfg, "semijoin", load)
            partial.extend(semijoin_rows(s.schema, sg, r.schema, rg))
    ledger.record("semijoin", len(s) * g_r + len(r) * g_s, len(partial), g_s * g_r, max_load)
    if g_r <= 1:
        return Relation(s.name, s.schema, frozenset(partial))
    return mr_dedup(Multiset(s.schema, partial, g_r), cfg, ledger, name=s.name)


@_strand
def mr_intersect(r: Relation, s: Relation, cfg: MachineConfig, ledger: CostLedger) -> Relation:
    """Hash every tuple on all attributes; reducers intersect locally."""
    if set(r.schema) != set(s.schema) or len(r.schema) != len(s.schema):
        raise SchemaError(f"cannot intersect {r.schema} with {s.schema}")
    s = s.reorder(r.schema)
    hseed = ledger.next_hash_seed(cfg.seed)
    nbuckets = max(1, min(max(len(r), len(s)) ** 2, cfg.bucket_cap))
    buckets: dict = {}
    for side, rel in ((0, r), (1, s)):
        rows = rel.sorted_rows()
        for row, b in zip(rows, kernels.bucket_rows(rows, hseed, nbuckets)):
            buckets.setdefault(b, ([], []))[side].append(row)
    max_load = max((len(a) + len(b) for a, b in buckets.values()), default=0)
    _check_load(ledger, cfg, "intersect", max_load)
    out = set()
    for a, b in buckets.values():
        out.update(set(a) & set(b))
    ledger.record("intersect", len(r) + len(s), len(out), len(buckets), max_load)
    return Relation(r.name, r.schema, frozenset(out))
