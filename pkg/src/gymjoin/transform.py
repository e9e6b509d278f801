"""Depth-reducing GHD transformations.

``log_gta`` turns a GHD of width w and intersection width iw into one of
logarithmic depth and width at most max(w, 3*iw). It works on an
``ExtendedGhd``: the GHD plus an active flag per node, the height assigned
when a node goes inactive, and a common cover (atom ids covering the shared
attributes) on every edge between two active nodes. Each round inactivates
all leaves of the active tree and a set of pairwise non-adjacent
"unique-c-gc" nodes (exactly one active child, which itself has exactly one
active child).

``c_gta_pass`` shrinks a tree by merging sibling leaves and parent/child
pairs, trading width for fewer nodes.
"""
from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from gymjoin.errors import InvalidGhdError, TransformError
from gymjoin.ghd import Ghd, intersection_width, min_cover, validate_ghd
from gymjoin.query import Query

log = logging.getLogger(__name__)


# -- plain tree shapes -----------------------------------------------------


def _only_child(children: Mapping[int, Sequence[int]], v):
    kids = children[v]
    return kids[0] if len(kids) == 1 else None


def is_unique_c_gc(children: Mapping[int, Sequence[int]], v) -> bool:
    c = _only_child(children, v)
    return c is not None and _only_child(children, c) is not None


def tree_stats(children: Mapping[int, Sequence[int]]) -> tuple[int, int, int]:
    """``(N, L, U)``: nodes, leaves, unique-c-gc nodes of a rooted tree."""
    n = len(children)
    if n == 1:
        return 1, 1, 0
    leaves = sum(1 for v in children if not children[v])
    uniques = sum(1 for v in children if is_unique_c_gc(children, v))
    return n, leaves, uniques


def _top_down(children, root) -> list:
    order, frontier = [], [root]
    while frontier:
        order.extend(frontier)
        frontier = [c for v in frontier for c in children[v]]
    return order


def select_nodes(children: Mapping[int, Sequence[int]], root) -> tuple[list, list]:
    """Leaves plus a greedy top-down choice of non-adjacent unique-c-gc nodes.

    Visiting nodes breadth-first from the root, each unique-c-gc node that
    is not forbidden is taken and its only child becomes forbidden.
    """
    leaves = sorted(v for v in children if not children[v])
    uniques, forbidden = [], set()
    for v in _top_down(children, root):
        if v in forbidden or not is_unique_c_gc(children, v):
            continue
        uniques.append(v)
        forbidden.add(children[v][0])
    return leaves, sorted(uniques)


# -- extended GHDs ---------------------------------------------------------


@dataclass
class ExtendedGhd:
    query: Query
    chi: dict
    lam: dict
    children: dict  # node -> list of children (whole tree, active or not)
    parent: dict  # node -> parent or None
    root: int
    active: dict
    height: dict  # node -> int, set on inactivation
    cc: dict  # (parent, child) -> frozenset of atom ids, active edges only
    iw: int
    width_bound: int
    next_id: int = 0
    trace: list = field(default_factory=list)

    def copy(self) -> ExtendedGhd:
        return copy.deepcopy(self)

    def active_nodes(self) -> list:
        return sorted(v for v, a in self.active.items() if a)

    def active_children(self, v) -> list:
        return [c for c in self.children[v] if self.active[c]]

    def active_tree(self) -> dict:
        return {v: self.active_children(v) for v in self.active_nodes()}

    def active_root(self):
        tops = [v for v in self.active_nodes() if self.parent[v] is None or not self.active[self.parent[v]]]
        return tops[0] if len(tops) == 1 else None

    def is_active_leaf(self, v) -> bool:
        return bool(self.active.get(v)) and not self.active_children(v)

    def is_active_unique_c_gc(self, v) -> bool:
        if not self.active.get(v):
            return False
        return is_unique_c_gc(_ActiveView(self), v)

    def to_ghd(self) -> Ghd:
        return Ghd.from_children(self.query, self.chi, self.lam, self.children, self.root)


class _ActiveView:
    """Mapping-like access to the active children of each node."""

    def __init__(self, e: ExtendedGhd):
        self.e = e

    def __getitem__(self, v):
        return self.e.active_children(v)


@dataclass(frozen=True)
class SelectionRound:
    leaves: tuple
    uniques: tuple


def extend(d: Ghd, iw_budget: int | None = None) -> ExtendedGhd:
    """All nodes active; each edge labelled with a minimum common cover."""
    report = validate_ghd(d.query, d)
    if not report.ok:
        raise InvalidGhdError(f"cannot extend an invalid GHD:\n{report}", report)
    budget = d.width if iw_budget is None else iw_budget
    cc = {}
    for p, c in d.tree_edges():
        cover = min_cover(d.query, d.chi(p) & d.chi(c), budget)
        if cover is None:
            raise TransformError(f"no common cover of size <= {budget} for edge ({p}, {c})")
        cc[(p, c)] = frozenset(cover)
    iw = max((len(v) for v in cc.values()), default=0)
    return ExtendedGhd(
        query=d.query,
        chi=d.chi_map(),
        lam=d.lam_map(),
        children={v: list(d.children(v)) for v in d.nodes},
        parent={v: d.parent(v) for v in d.nodes},
        root=d.root,
        active={v: True for v in d.nodes},
        height={},
        cc=cc,
        iw=iw,
        width_bound=max(d.width, 3 * iw),
        next_id=max(d.nodes) + 1,
    )


def _settle_height(e: ExtendedGhd, v) -> int:
    kids = e.children[v]
    e.height[v] = 1 + max(e.height[c] for c in kids) if kids else 0
    return e.height[v]


def _leaf_in_place(e: ExtendedGhd, leaf, round_no=None):
    if not e.is_active_leaf(leaf):
        raise TransformError(f"node {leaf} is not an active leaf")
    e.active[leaf] = False
    h = _settle_height(e, leaf)
    p = e.parent[leaf]
    if p is not None:
        e.cc.pop((p, leaf), None)
    e.trace.append({"round": round_no, "op": "leaf", "node": leaf, "heights": {str(leaf): h}})


def _detach(e: ExtendedGhd, p, c):
    e.children[p].remove(c)
    e.parent[c] = None


def _attach(e: ExtendedGhd, p, c):
    e.children[p].append(c)
    e.parent[c] = p


def _unique_in_place(e: ExtendedGhd, u, round_no=None):
    if not e.is_active_unique_c_gc(u):
        raise TransformError(f"node {u} is not a unique-c-gc node of the active tree")
    (c,) = e.active_children(u)
    (gc,) = e.active_children(c)
    p = e.parent[u]
    cc_pu = e.cc.pop((p, u), frozenset()) if p is not None else frozenset()
    cc_uc = e.cc.pop((u, c))
    cc_cgc = e.cc.pop((c, gc))
    s = e.next_id
    e.next_id += 1
    top = (e.chi[p] & e.chi[u]) if p is not None else frozenset()
    e.chi[s] = top | (e.chi[u] & e.chi[c]) | (e.chi[c] & e.chi[gc])
    e.lam[s] = cc_pu | cc_uc | cc_cgc
    e.children[s] = []
    e.parent[s] = None
    e.active[s] = True

    if p is not None:
        _detach(e, p, u)
    _detach(e, u, c)
    _detach(e, c, gc)
    e.active[u] = False
    e.active[c] = False
    hu = _settle_height(e, u)
    hc = _settle_height(e, c)
    if p is not None:
        # keep s where u used to sit among p's children
        _attach(e, p, s)
        e.cc[(p, s)] = cc_pu
    else:
        e.root = s
    for x in (u, c, gc):
        _attach(e, s, x)
    e.cc[(s, gc)] = cc_cgc
    e.trace.append(
        {
            "round": round_no,
            "op": "unique-c-gc",
            "node": u,
            "child": c,
            "grandchild": gc,
            "new": s,
            "heights": {str(u): hu, str(c): hc},
        }
    )
    return s


def inactivate_leaf(e: ExtendedGhd, leaf) -> ExtendedGhd:
    out = e.copy()
    _leaf_in_place(out, leaf)
    return out


def inactivate_unique_c_gc(e: ExtendedGhd, u) -> ExtendedGhd:
    out = e.copy()
    _unique_in_place(out, u)
    return out


def select_round(e: ExtendedGhd) -> SelectionRound:
    root = e.active_root()
    if root is None:
        raise TransformError("active nodes do not form a single tree")
    leaves, uniques = select_nodes(e.active_tree(), root)
    return SelectionRound(tuple(leaves), tuple(uniques))


def check_extended(e: ExtendedGhd) -> list[str]:
    """Every broken invariant of an extended GHD, as readable strings."""
    problems = []
    act = e.active_nodes()
    if act:
        tops = [v for v in act if e.parent[v] is None or not e.active[e.parent[v]]]
        if len(tops) != 1:
            problems.append(f"active nodes form {len(tops)} components")
        elif tops[0] != e.root:
            problems.append(f"active tree top {tops[0]} is not the root {e.root}")
    for v, a in e.active.items():
        if not a:
            bad = [c for c in e.children[v] if e.active[c]]
            if bad:
                problems.append(f"inactive node {v} has active children {bad}")
    truth = {}
    d = e.to_ghd()
    try:
        truth = d.heights()
    except (KeyError, RecursionError):
        problems.append("tree structure is broken")
    for v, h in e.height.items():
        if truth and truth.get(v) != h:
            problems.append(f"node {v}: recorded height {h}, actual {truth.get(v)}")
    for v in act:
        for c in e.active_children(v):
            cover = e.cc.get((v, c))
            if cover is None:
                problems.append(f"active edge ({v}, {c}) has no common cover")
                continue
            if len(cover) > e.iw:
                problems.append(f"cover of ({v}, {c}) has size {len(cover)} > iw {e.iw}")
            got = set().union(*(e.query.edge(a) for a in cover)) if cover else set()
            if not (e.chi[v] & e.chi[c]) <= got:
                problems.append(f"cover of ({v}, {c}) misses {sorted((e.chi[v] & e.chi[c]) - got)}")
    report = validate_ghd(e.query, d)
    if not report.ok:
        problems.append(f"not a GHD: {report}")
    if d.width > e.width_bound:
        problems.append(f"width {d.width} exceeds {e.width_bound}")
    return problems


@dataclass
class LogGtaResult:
    ghd: Ghd
    rounds: int
    trace: list
    heights: dict
    round_of: dict  # node -> round in which it went inactive


def log_gta_run(d: Ghd, iw_budget: int | None = None, check: bool = False) -> LogGtaResult:
    """Run the log-depth transformation; ``check`` validates after every step."""
    e = extend(d, iw_budget)
    rounds = 0
    round_of = {}
    while any(e.active.values()):
        rounds += 1
        sel = select_round(e)
        for u in sel.uniques:
            if not e.is_active_unique_c_gc(u):
                log.warning("skipping node %s: no longer unique-c-gc", u)
                continue
            (c,) = e.active_children(u)
            _unique_in_place(e, u, rounds)
            round_of[u] = round_of[c] = rounds
            if check:
                _assert_ok(e)
        for leaf in sel.leaves:
            if not e.is_active_leaf(leaf):
                log.warning("skipping node %s: no longer an active leaf", leaf)
                continue
            _leaf_in_place(e, leaf, rounds)
            round_of[leaf] = rounds
            if check:
                _assert_ok(e)
    return LogGtaResult(e.to_ghd(), rounds, e.trace, dict(e.height), round_of)


def _assert_ok(e: ExtendedGhd):
    problems = check_extended(e)
    if problems:
        raise TransformError("extended GHD invariant broken: " + "; ".join(problems))


def log_gta(d: Ghd, iw_budget: int | None = None) -> Ghd:
    return log_gta_run(d, iw_budget).ghd


def log_round_bound(n_nodes: int) -> int:
    """Rounds allowed for ``n_nodes`` nodes: ceil(log_{4/3} N) + 1."""
    if n_nodes <= 1:
        return 1
    return math.ceil(math.log(n_nodes) / math.log(4 / 3) - 1e-12) + 1


# -- merging passes --------------------------------------------------------


def c_gta_pass(d: Ghd) -> Ghd:
    """One merge pass, planned on a snapshot of the input tree.

    1-2. Under each parent, leaf children are merged in ascending pairs; an
         odd one out is merged into the parent.
    3.   A node with a single child whose leaf-child count is even merges
         with that child, if neither is already part of a merge.
    """
    if len(d) < 2:
        raise TransformError("a merge pass needs at least two nodes")
    report = validate_ghd(d.query, d)
    if not report.ok:
        raise InvalidGhdError(f"input is not a valid GHD:\n{report}", report)
    is_leaf = {v: not d.children(v) for v in d.nodes}
    leaf_kids = {v: [c for c in d.children(v) if is_leaf[c]] for v in d.nodes}
    taken = set()
    merges = []
    for u in d.nodes:
        kids = leaf_kids[u]
        for i in range(0, len(kids) - 1, 2):
            merges.append((kids[i], kids[i + 1]))
            taken.update(kids[i : i + 2])
        if len(kids) % 2:
            merges.append((u, kids[-1]))
            taken.update((u, kids[-1]))
    for u in d.nodes:
        kids = d.children(u)
        if len(kids) != 1:
            continue
        c = kids[0]
        if u in taken or c in taken or len(leaf_kids[c]) % 2:
            continue
        merges.append((u, c))
        taken.update((u, c))

    rep = {v: v for v in d.nodes}
    for a, b in merges:
        keep = min(a, b)
        rep[a] = rep[b] = keep
    chi, lam = {}, {}
    for v in d.nodes:
        r = rep[v]
        chi[r] = chi.get(r, frozenset()) | d.chi(v)
        lam[r] = lam.get(r, frozenset()) | d.lam(v)
    edges = {(rep[p], rep[c]) for p, c in d.tree_edges() if rep[p] != rep[c]}
    return Ghd.from_edges(d.query, chi, lam, sorted(edges), rep[d.root])


def c_gta_then_log(d: Ghd, i: int, iw_budget: int | None = None) -> Ghd:
    if i < 0:
        raise ValueError("number of merge passes must be >= 0")
    for _ in range(i):
        if len(d) < 2:
            break
        d = c_gta_pass(d)
    return log_gta(d, iw_budget)


def width_bound(d: Ghd, passes: int = 0, iw_budget: int | None = None) -> int:
    """The width guarantee max(w, 3*iw) scaled by 2 per merge pass."""
    iw = intersection_width(d, iw_budget)
    if iw is None:
        raise TransformError("intersection width exceeds the cover budget")
    return 2**passes * max(d.width, 3 * iw)
