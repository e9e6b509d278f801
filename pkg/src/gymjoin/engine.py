"""Join engines over GHDs.

* ``serial_yannakakis``: semijoin phase (upward, then downward) and a
  bottom-up join phase, run with serial operators.
* ``dym_n``: the same operation sequence, each step a simulated MR primitive.
* ``dym_d``: leaves processed in parallel; sibling leaves are paired so the
  tree contracts in O(depth + log n) parallel steps.
* ``gym``: materialize one relation per GHD node (IDB), then run ``dym_d``
  (or ``dym_n``) over the resulting width-1 decomposition.
"""
from __future__ import annotations

from contextlib import nullcontext
from dataclasses import dataclass, field
from typing import Callable

from gymjoin import bsp
from gymjoin.bsp import CostLedger, MachineConfig
from gymjoin.errors import InvalidGhdError, OracleBudgetExceeded, WidthError
from gymjoin.ghd import Ghd, complete_and_minimize, validate_ghd
from gymjoin.query import Atom, Database, Query, bind, input_size, oracle_join
from gymjoin.relation import (
    Multiset,
    Relation,
    serial_intersect,
    serial_join,
    serial_semijoin,
)


@dataclass
class NodeState:
    node_id: int
    current: Relation
    removed: bool = False


@dataclass
class Tree:
    """Rooted tree shape the engines walk over."""

    root: int
    children: dict
    parent: dict

    @classmethod
    def of(cls, d: Ghd) -> Tree:
        return cls(d.root, {v: list(d.children(v)) for v in d.nodes}, {v: d.parent(v) for v in d.nodes})

    def postorder(self) -> list:
        out, stack = [], [(self.root, False)]
        while stack:
            v, done = stack.pop()
            if done:
                out.append(v)
            else:
                stack.append((v, True))
                stack.extend((c, False) for c in reversed(self.children[v]))
        return out

    def depths(self) -> dict:
        depth = {self.root: 0}
        for v in reversed(self.postorder()):
            for c in self.children[v]:
                depth[c] = depth[v] + 1
        return depth


@dataclass
class RunReport:
    engine: str
    output: Relation
    ledger: CostLedger
    op_counts: dict
    phase_breakdown: dict
    max_intermediate: int
    reduced: dict = field(default_factory=dict)  # node -> relation after the semijoin phase
    potentials: list = field(default_factory=list)  # upward-phase X(T) per iteration (dym_d)
    idb_sizes: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_json_obj(self) -> dict:
        return {
            "engine": self.engine,
            "output_size": len(self.output),
            "op_counts": self.op_counts,
            "phase_breakdown": self.phase_breakdown,
            "max_intermediate": self.max_intermediate,
            "upward_potentials": self.potentials,
            "idb_sizes": {str(k): v for k, v in sorted(self.idb_sizes.items())},
            "warnings": self.warnings,
            "ledger": self.ledger.to_json_obj(),
        }


class Ops:
    """Counted relational steps, serial or on the simulator."""

    def __init__(self, cfg: MachineConfig | None = None, ledger: CostLedger | None = None):
        self.cfg = cfg
        self.ledger = ledger if ledger is not None else CostLedger()
        self.counts = {"semijoins": 0, "intersections": 0, "joins": 0}
        self.max_join = 0

    @property
    def distributed(self) -> bool:
        return self.cfg is not None

    def semijoin(self, s: Relation, r: Relation) -> Relation:
        self.counts["semijoins"] += 1
        if self.cfg is None:
            return serial_semijoin(s, r)
        return bsp.mr_semijoin(s, r, self.cfg, self.ledger)

    def intersect(self, a: Relation, b: Relation) -> Relation:
        self.counts["intersections"] += 1
        if self.cfg is None:
            return serial_intersect(a, b)
        return bsp.mr_intersect(a, b, self.cfg, self.ledger)

    def join(self, a: Relation, b: Relation) -> Relation:
        self.counts["joins"] += 1
        if self.cfg is None:
            out = serial_join([a, b], name=a.name)
        else:
            out = bsp.mr_join([a, b], self.cfg, self.ledger, name=a.name)
        self.max_join = max(self.max_join, len(out))
        return out

    def parallel(self):
        return self.ledger.parallel() if self.cfg is not None else nullcontext()

    def branch(self):
        return self.ledger.branch() if self.cfg is not None else nullcontext()


class _Phases:
    def __init__(self, ledger: CostLedger):
        self.ledger = ledger
        self.data = {}

    def run(self, name: str, fn: Callable):
        r0, c0 = self.ledger.snapshot()
        out = fn()
        r1, c1 = self.ledger.snapshot()
        self.data[name] = {"rounds": r1 - r0, "communicated": c1 - c0}
        return out


# -- inputs ----------------------------------------------------------------


def _require_join_tree(q: Query, d: Ghd):
    report = validate_ghd(q, d)
    if not report.ok:
        raise InvalidGhdError(f"invalid GHD:\n{report}", report)
    if d.width != 1:
        raise WidthError(f"width must be 1 for this engine (got {d.width}); use gym")
    if not d.is_complete():
        raise WidthError("every atom must sit in some lambda label; use gym")
    for v in d.nodes:
        (a,) = d.lam(v)
        if d.chi(v) != q.edge(a):
            raise WidthError(f"node {v}: chi differs from the attributes of its atom; use gym")


def node_relations(q: Query, d: Ghd, db: Database) -> dict:
    rels = {}
    for v in d.nodes:
        (a,) = d.lam(v)
        rels[v] = bind(q.atom(a), db)
    return rels


# -- serial order (serial_yannakakis, dym_n) -------------------------------


def semijoin_phase(tree: Tree, rels: dict, ops: Ops, phases: _Phases | None = None, downward: bool = True) -> dict:
    """Upward pass in post-order, then the downward pass in reverse."""
    rels = dict(rels)
    order = [v for v in tree.postorder() if v != tree.root]

    def up():
        for v in order:
            p = tree.parent[v]
            rels[p] = ops.semijoin(rels[p], rels[v])

    def down():
        for v in reversed(order):
            rels[v] = ops.semijoin(rels[v], rels[tree.parent[v]])

    if phases is None:
        up()
        if downward:
            down()
    else:
        phases.run("upward", up)
        if downward:
            phases.run("downward", down)
    return rels


def _serial_join_phase(tree: Tree, rels: dict, ops: Ops) -> Relation:
    rels = dict(rels)
    for v in tree.postorder():
        if v == tree.root:
            break
        p = tree.parent[v]
        rels[p] = ops.join(rels[p], rels[v])
    return rels[tree.root]


def _finish(q: Query, rel: Relation) -> Relation:
    return rel.reorder(q.attributes).renamed("OUT")


def _run_sequential(engine, q: Query, tree: Tree, rels: dict, ops: Ops) -> RunReport:
    phases = _Phases(ops.ledger)
    reduced = semijoin_phase(tree, rels, ops, phases)
    out = phases.run("join", lambda: _serial_join_phase(tree, reduced, ops))
    return RunReport(
        engine=engine,
        output=_finish(q, out),
        ledger=ops.ledger,
        op_counts=dict(ops.counts),
        phase_breakdown=phases.data,
        max_intermediate=ops.max_join,
        reduced=reduced,
    )


def serial_yannakakis(q: Query, d: Ghd, db: Database) -> RunReport:
    _require_join_tree(q, d)
    return _run_sequential("serial", q, Tree.of(d), node_relations(q, d, db), Ops())


def dym_n(q: Query, d: Ghd, db: Database, cfg: MachineConfig) -> RunReport:
    _require_join_tree(q, d)
    ops = Ops(cfg)
    _note_memory(q, db, cfg, ops.ledger)
    return _run_sequential("dym-n", q, Tree.of(d), node_relations(q, d, db), ops)


def _note_memory(q, db, cfg, ledger):
    n_in = input_size(q, db)
    if cfg.M >= n_in:
        ledger.warnings.append(f"memory M={cfg.M} is not below IN={n_in}")


# -- parallel contraction (dym_d) ------------------------------------------


class _Contraction:
    """Working copy of the tree for one leaf-contraction sweep."""

    def __init__(self, tree: Tree):
        self.tree = tree
        self.kids = {v: list(c) for v, c in tree.children.items()}
        self.depth = tree.depths()
        self.alive = set(tree.children)

    def done(self) -> bool:
        return len(self.alive) == 1

    def leaves(self) -> list:
        return sorted(v for v in self.alive if not self.kids[v] and v != self.tree.root)

    def potential(self) -> int:
        return sum(2 ** self.depth[v] for v in self.alive if not self.kids[v])

    def plan(self):
        """``(singles, groups)``: lone leaf children, and pairs/triples of sibling leaves."""
        by_parent: dict = {}
        for leaf in self.leaves():
            by_parent.setdefault(self.tree.parent[leaf], []).append(leaf)
        singles, groups = [], []
        for p in sorted(by_parent):
            ls = by_parent[p]
            if len(ls) == 1:
                singles.append(ls[0])
                continue
            chunk = [ls[i : i + 2] for i in range(0, len(ls) - len(ls) % 2, 2)]
            if len(ls) % 2:
                chunk[-1].append(ls[-1])
            groups.extend(chunk)
        return singles, groups

    def remove(self, v):
        self.alive.discard(v)
        self.kids[self.tree.parent[v]].remove(v)


def _contract(tree: Tree, rels: dict, ops: Ops, single, group, on_leaf=None) -> tuple[Relation, list]:
    """Shrink the tree to its root with ``single``/``group`` steps per iteration.

    ``single(S, R)`` returns the new parent value; ``group(S, [R1, R2, ...])``
    returns the new value for the first leaf. ``on_leaf(v, rel)`` fires once
    for every node when it first becomes a leaf.
    """
    rels = dict(rels)
    work = _Contraction(tree)
    if on_leaf is not None:
        for v in work.leaves():
            on_leaf(v, rels[v])
    potentials = [work.potential()]
    while not work.done():
        singles, groups = work.plan()
        updates = {}
        with ops.parallel():
            for leaf in singles:
                p = tree.parent[leaf]
                with ops.branch():
                    updates[p] = single(rels[p], rels[leaf])
            for g in groups:
                p = tree.parent[g[0]]
                with ops.branch():
                    updates[g[0]] = group(rels[p], [rels[x] for x in g])
        rels.update(updates)
        for leaf in singles:
            work.remove(leaf)
        for g in groups:
            for x in g[1:]:
                work.remove(x)
        if on_leaf is not None:
            for leaf in singles:
                p = tree.parent[leaf]
                if not work.kids[p]:
                    on_leaf(p, rels[p])
        potentials.append(work.potential())
    return rels[tree.root], potentials


def _fold(fn, items):
    acc = items[0]
    for x in items[1:]:
        acc = fn(acc, x)
    return acc


def _dym_d_core(engine, q: Query, tree: Tree, rels: dict, ops: Ops, phases: _Phases) -> RunReport:
    settled = {}

    def record(v, rel):
        settled.setdefault(v, rel)

    def up_group(s, leaves):
        with ops.parallel():
            parts = []
            for r in leaves:
                with ops.branch():
                    parts.append(ops.semijoin(s, r))
        return _fold(ops.intersect, parts)

    def upward():
        root_val, pots = _contract(tree, rels, ops, ops.semijoin, up_group, on_leaf=record)
        settled[tree.root] = root_val
        return pots

    potentials = phases.run("upward", upward)

    reduced = dict(settled)

    def downward():
        depth = tree.depths()
        levels: dict = {}
        for v, dv in depth.items():
            levels.setdefault(dv, []).append(v)
        for dv in sorted(levels):
            with ops.parallel():
                for v in sorted(levels[dv]):
                    for c in tree.children[v]:
                        reduced[c] = ops.semijoin(reduced[c], reduced[v])

    phases.run("downward", downward)
    final = dict(reduced)

    def join_group(s, leaves):
        with ops.parallel():
            parts = []
            for r in leaves:
                with ops.branch():
                    parts.append(ops.join(r, s))
        return _fold(ops.join, parts)

    out, _ = phases.run("join", lambda: _contract(tree, final, ops, lambda s, r: ops.join(s, r), join_group))
    return RunReport(
        engine=engine,
        output=_finish(q, out),
        ledger=ops.ledger,
        op_counts=dict(ops.counts),
        phase_breakdown=phases.data,
        max_intermediate=ops.max_join,
        reduced=final,
        potentials=potentials,
    )


def dym_d(q: Query, d: Ghd, db: Database, cfg: MachineConfig) -> RunReport:
    _require_join_tree(q, d)
    ops = Ops(cfg)
    _note_memory(q, db, cfg, ops.ledger)
    report = _dym_d_core("dym-d", q, Tree.of(d), node_relations(q, d, db), ops, _Phases(ops.ledger))
    report.warnings = ops.ledger.warnings
    return report


# -- GYM -------------------------------------------------------------------


def enforcement_plan(q: Query, d: Ghd) -> dict:
    """Atoms joined into each node's IDB.

    A node joins its ``lam`` atoms. An atom whose attributes never fit
    inside the ``chi`` of a node holding it in ``lam`` is also joined into
    the shallowest node whose ``chi`` contains it (lowest id on ties), so
    its constraint survives the projection onto ``chi``.
    """
    plan = {v: set(d.lam(v)) for v in d.nodes}
    depth = d.depths()
    for atom in q.atoms:
        e = atom.attr_set
        if any(atom.atom_id in d.lam(v) and e <= d.chi(v) for v in d.nodes):
            continue
        host = min((v for v in d.nodes if e <= d.chi(v)), key=lambda v: (depth[v], v))
        plan[host].add(atom.atom_id)
    return {v: sorted(a) for v, a in plan.items()}


def _dup_bound(q: Query, db: Database, atoms: list, chi: frozenset, joined: int) -> int:
    k = 1
    for a in atoms:
        if q.edge(a) - chi:
            k *= max(1, len(db[q.atom(a).relation]))
    return max(1, min(k, joined))


def materialize(q: Query, d: Ghd, db: Database, cfg: MachineConfig | None, ledger: CostLedger) -> dict:
    """IDB per node: join of its planned atoms, projected onto ``chi``.

    All nodes run in one parallel region. Single-atom nodes whose ``chi``
    equals the atom's attributes are just the bound relation.
    """
    plan = enforcement_plan(q, d)
    idbs = {}
    region = ledger.parallel() if cfg is not None else nullcontext()
    with region:
        for v in d.nodes:
            atoms = plan[v]
            rels = [bind(q.atom(a), db) for a in atoms]
            chi = d.chi(v)
            schema = tuple(x for x in dict.fromkeys(y for r in rels for y in r.schema) if x in chi)
            name = f"IDB{v}"
            if len(rels) == 1 and set(rels[0].schema) == chi:
                idbs[v] = rels[0].renamed(name)
                continue
            with ledger.branch() if cfg is not None else nullcontext():
                if cfg is None:
                    joined = serial_join(rels, name=name)
                    idbs[v] = joined.project(schema, name=name)
                    continue
                joined = bsp.mr_join(rels, cfg, ledger, name=name) if len(rels) > 1 else rels[0]
                if set(joined.schema) == chi:
                    idbs[v] = joined.renamed(name).reorder(schema)
                    continue
                idx = [joined.schema.index(x) for x in schema]
                rows = [tuple(r[i] for i in idx) for r in joined.sorted_rows()]
                k = _dup_bound(q, db, atoms, chi, len(joined))
                idbs[v] = bsp.mr_dedup(Multiset(schema, rows, k), cfg, ledger, name=name)
    return idbs


def idb_instance(q: Query, d: Ghd, db: Database):
    """The materialized query: one atom ``IDB<v>`` per node over its ``chi``.

    Returns ``(q2, db2, d2)`` where ``d2`` is a width-1 join tree of ``q2``
    with the shape of ``d``; ``q2`` has the same output as ``q``.
    """
    if not d.is_complete():
        d = complete_and_minimize(q, d)
    idbs = materialize(q, d, db, None, CostLedger())
    atoms = [Atom(v, f"IDB{v}", idbs[v].schema) for v in d.nodes]
    q2 = Query(atoms)
    db2 = {f"IDB{v}": Relation(f"IDB{v}", idbs[v].schema, idbs[v].rows) for v in d.nodes}
    chi = {v: frozenset(idbs[v].schema) for v in d.nodes}
    lam = {v: frozenset({v}) for v in d.nodes}
    d2 = Ghd.from_children(q2, chi, lam, {v: list(d.children(v)) for v in d.nodes}, d.root)
    return q2, db2, d2


def gym(q: Query, d: Ghd, db: Database, cfg: MachineConfig, mode: str = "dym-d") -> RunReport:
    """Materialize IDBs, then evaluate the width-1 IDB tree.

    ``mode`` picks the engine for the second stage: ``dym-d`` (default) or
    ``dym-n``. Materialization joins are not part of ``op_counts``.
    """
    report = validate_ghd(q, d)
    if not report.ok:
        raise InvalidGhdError(f"invalid GHD:\n{report}", report)
    if mode not in ("dym-d", "dym-n"):
        raise ValueError(f"unknown gym mode {mode!r}")
    if not d.is_complete():
        d = complete_and_minimize(q, d)
    ops = Ops(cfg)
    _note_memory(q, db, cfg, ops.ledger)
    phases = _Phases(ops.ledger)
    idbs = phases.run("materialize", lambda: materialize(q, d, db, cfg, ops.ledger))
    tree = Tree.of(d)
    if mode == "dym-d":
        out = _dym_d_core("gym", q, tree, idbs, ops, phases)
    else:
        reduced = semijoin_phase(tree, idbs, ops, phases)
        root = phases.run("join", lambda: _serial_join_phase(tree, reduced, ops))
        out = RunReport("gym", _finish(q, root), ops.ledger, dict(ops.counts), phases.data, ops.max_join, reduced)
    out.idb_sizes = {v: len(r) for v, r in idbs.items()}
    out.warnings = ops.ledger.warnings
    return out


# -- checks ----------------------------------------------------------------


def check_full_reduction(q: Query, db: Database, states: dict, budget: int = 100_000) -> bool:
    """Every row left at every node extends to at least one output row."""
    try:
        out = oracle_join(q, db, limit=budget)
    except OverflowError:
        raise OracleBudgetExceeded(f"oracle output exceeds {budget} rows") from None
    for rel in states.values():
        if isinstance(rel, NodeState):
            if rel.removed:
                continue
            rel = rel.current
        if not rel.rows <= out.project(rel.schema).rows:
            return False
    return True


ENGINES = ("serial", "dym-n", "dym-d", "gym")


def run_engine(engine: str, q: Query, d: Ghd, db: Database, cfg: MachineConfig) -> RunReport:
    if engine == "serial":
        return serial_yannakakis(q, d, db)
    if engine == "dym-n":
        return dym_n(q, d, db, cfg)
    if engine == "dym-d":
        return dym_d(q, d, db, cfg)
    if engine == "gym":
        return gym(q, d, db, cfg)
    raise ValueError(f"unknown engine {engine!r}; pick one of {', '.join(ENGINES)}")
