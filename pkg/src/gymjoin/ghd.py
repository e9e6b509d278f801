"""Generalized hypertree decompositions: structure, validation, and metrics.

A ``Ghd`` is a rooted tree whose nodes carry an attribute set ``chi`` and a
set of atom ids ``lam``. It is a GHD of a query when

1. every atom's attributes lie inside some node's ``chi``;
2. for each attribute, the nodes whose ``chi`` holds it form a subtree;
3. each node's ``chi`` is covered by the attributes of its ``lam`` atoms.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping

from gymjoin.errors import InvalidGhdError
from gymjoin.query import Query


@dataclass(frozen=True)
class GhdNode:
    node_id: int
    chi: frozenset
    lam: frozenset
    children: tuple = ()
    parent: int | None = None


class Ghd:
    """Immutable rooted decomposition tree tied to a query."""

    def __init__(self, query: Query, nodes: Mapping[int, GhdNode], root: int):
        self.query = query
        self.nodes = dict(sorted(nodes.items()))
        self.root = root

    @classmethod
    def from_children(cls, query, chi, lam, children, root) -> Ghd:
        parent = {}
        for p, kids in children.items():
            for c in kids:
                parent.setdefault(c, p)
        ids = set(chi) | set(lam) | set(children)
        nodes = {
            v: GhdNode(
                v,
                frozenset(chi.get(v, ())),
                frozenset(lam.get(v, ())),
                tuple(children.get(v, ())),
                parent.get(v),
            )
            for v in ids
        }
        return cls(query, nodes, root)

    @classmethod
    def from_edges(cls, query, chi, lam, edges: Iterable[tuple[int, int]], root) -> Ghd:
        """Orient an undirected tree away from ``root``; children sorted by id."""
        adj = {v: set() for v in chi}
        for a, b in edges:
            adj[a].add(b)
            adj[b].add(a)
        children = {v: [] for v in adj}
        seen = {root}
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for u in sorted(adj[v]):
                if u not in seen:
                    seen.add(u)
                    children[v].append(u)
                    queue.append(u)
        if len(seen) != len(adj):
            raise InvalidGhdError(f"edges do not form a tree spanning all nodes (reached {len(seen)}/{len(adj)})")
        return cls.from_children(query, chi, lam, children, root)

    # -- structure -------------------------------------------------------

    def __len__(self):
        return len(self.nodes)

    def __getitem__(self, v) -> GhdNode:
        return self.nodes[v]

    @property
    def node_ids(self) -> list[int]:
        return list(self.nodes)

    def chi(self, v) -> frozenset:
        return self.nodes[v].chi

    def lam(self, v) -> frozenset:
        return self.nodes[v].lam

    def children(self, v) -> tuple:
        return self.nodes[v].children

    def parent(self, v):
        return self.nodes[v].parent

    def tree_edges(self) -> list[tuple[int, int]]:
        return [(v, c) for v, node in self.nodes.items() for c in node.children]

    def neighbors(self, v) -> list[int]:
        node = self.nodes[v]
        out = list(node.children)
        if node.parent is not None:
            out.append(node.parent)
        return sorted(out)

    def preorder(self) -> list[int]:
        out, stack = [], [self.root]
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(reversed(self.nodes[v].children))
        return out

    def postorder(self) -> list[int]:
        out, stack = [], [(self.root, False)]
        while stack:
            v, done = stack.pop()
            if done:
                out.append(v)
                continue
            stack.append((v, True))
            for c in reversed(self.nodes[v].children):
                stack.append((c, False))
        return out

    def depths(self) -> dict[int, int]:
        depth = {self.root: 0}
        for v in self.preorder():
            for c in self.nodes[v].children:
                depth[c] = depth[v] + 1
        return depth

    @property
    def depth(self) -> int:
        return max(self.depths().values())

    def heights(self) -> dict[int, int]:
        """Longest downward distance from each node to a leaf."""
        h = {}
        for v in self.postorder():
            kids = self.nodes[v].children
            h[v] = 1 + max(h[c] for c in kids) if kids else 0
        return h

    def leaves(self) -> list[int]:
        return [v for v, node in self.nodes.items() if not node.children]

    @property
    def width(self) -> int:
        return max(len(node.lam) for node in self.nodes.values())

    def is_complete(self) -> bool:
        covered = set().union(*(node.lam for node in self.nodes.values()))
        return set(self.query.atom_ids) <= covered

    def chi_map(self) -> dict[int, frozenset]:
        return {v: n.chi for v, n in self.nodes.items()}

    def lam_map(self) -> dict[int, frozenset]:
        return {v: n.lam for v, n in self.nodes.items()}

    def to_json_obj(self) -> dict:
        return {
            "root": self.root,
            "nodes": [
                {
                    "id": v,
                    "chi": sorted(n.chi),
                    "lambda": sorted(n.lam),
                    "children": sorted(n.children),
                }
                for v, n in self.nodes.items()
            ],
        }

    def __eq__(self, other):
        return (
            isinstance(other, Ghd)
            and self.root == other.root
            and self.nodes == other.nodes
            and self.query == other.query
        )

    def __repr__(self):
        return f"Ghd(nodes={len(self.nodes)}, root={self.root}, width={self.width})"


# -- validation ------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str  # tree | unknown-atom | unknown-attribute | coverage | connectivity | cover
    node: int | None
    detail: str


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def add(self, kind, node, detail):
        self.violations.append(Violation(kind, node, detail))

    def __str__(self):
        if self.ok:
            return "valid GHD"
        return "\n".join(f"[{v.kind}] node={v.node}: {v.detail}" for v in self.violations)


def _tree_problems(d: Ghd, report: ValidationReport) -> bool:
    if d.root not in d.nodes:
        report.add("tree", d.root, "root is not a node")
        return False
    ok = True
    if d.nodes[d.root].parent is not None:
        report.add("tree", d.root, "root has a parent")
        ok = False
    seen = {d.root}
    queue = deque([d.root])
    while queue:
        v = queue.popleft()
        for c in d.nodes[v].children:
            if c not in d.nodes:
                report.add("tree", v, f"child {c} does not exist")
                ok = False
                continue
            if c in seen:
                report.add("tree", c, "reached twice (cycle or shared child)")
                ok = False
                continue
            if d.nodes[c].parent != v:
                report.add("tree", c, f"parent pointer {d.nodes[c].parent} disagrees with child list of {v}")
                ok = False
            seen.add(c)
            queue.append(c)
    for v in d.nodes:
        if v not in seen:
            report.add("tree", v, "not reachable from the root")
            ok = False
    return ok


def validate_ghd(q: Query, d: Ghd) -> ValidationReport:
    """Check tree shape and the three GHD properties; violations are data."""
    report = ValidationReport()
    is_tree = _tree_problems(d, report)
    attrs = set(q.attributes)
    atom_ids = set(q.atom_ids)
    for v, node in d.nodes.items():
        for a in sorted(node.lam - atom_ids):
            report.add("unknown-atom", v, f"lambda names atom {a} which is not in the query")
        for x in sorted(node.chi - attrs):
            report.add("unknown-attribute", v, f"chi holds {x!r} which is not a query attribute")
    holders: dict = {}
    for v, node in d.nodes.items():
        for x in node.chi:
            holders.setdefault(x, set()).add(v)
    for atom in q.atoms:
        first = holders.get(atom.attrs[0], ())
        if not any(atom.attr_set <= d.nodes[v].chi for v in first):
            report.add("coverage", None, f"atom {atom.atom_id} {atom} is not inside any chi")
    if is_tree:
        # nodes holding x form a subtree iff exactly |holders| - 1 tree edges join two of them
        inner: dict = {}
        for p, c in d.tree_edges():
            for x in d.nodes[p].chi & d.nodes[c].chi:
                inner[x] = inner.get(x, 0) + 1
        for x in q.attributes:
            hs = holders.get(x)
            if hs and inner.get(x, 0) != len(hs) - 1:
                report.add("connectivity", None, f"nodes holding {x!r} are not connected: {sorted(hs)}")
    for v, node in d.nodes.items():
        covered = set()
        for a in node.lam & atom_ids:
            covered |= q.edge(a)
        loose = node.chi - covered
        if loose:
            report.add("cover", v, f"chi attributes {sorted(loose)} not covered by lambda {sorted(node.lam)}")
    return report


# -- metrics ---------------------------------------------------------------


def min_cover(q: Query, target: frozenset, budget: int):
    """Smallest atom-id set whose attributes cover ``target``.

    Among minimum-size covers the lexicographically smallest sorted tuple is
    returned. ``None`` when no cover of size <= ``budget`` exists.
    """
    if not target:
        return ()
    candidates = sorted({a for x in target for a in q.atoms_with(x)})
    for k in range(1, budget + 1):
        for combo in combinations(candidates, k):
            got = set()
            for a in combo:
                got |= q.edge(a)
            if target <= got:
                return combo
    return None


@dataclass(frozen=True)
class GhdStats:
    w: int
    d: int
    iw: int | None  # None: no cover found within the budget
    node_count: int
    complete: bool

    def to_json_obj(self) -> dict:
        return {"w": self.w, "d": self.d, "iw": self.iw, "complete": self.complete, "node_count": self.node_count}


def intersection_width(d: Ghd, iw_budget: int | None = None):
    budget = d.width if iw_budget is None else iw_budget
    iw = 0
    for p, c in d.tree_edges():
        cover = min_cover(d.query, d.chi(p) & d.chi(c), budget)
        if cover is None:
            return None
        iw = max(iw, len(cover))
    return iw


def stats(d: Ghd, iw_budget: int | None = None) -> GhdStats:
    return GhdStats(
        w=d.width,
        d=d.depth,
        iw=intersection_width(d, iw_budget),
        node_count=len(d),
        complete=d.is_complete(),
    )


# -- rerooting and normalization -------------------------------------------


def root_at(d: Ghd, v: int) -> Ghd:
    if v not in d.nodes:
        raise KeyError(f"unknown node {v}")
    if v == d.root:
        return d
    return Ghd.from_edges(d.query, d.chi_map(), d.lam_map(), d.tree_edges(), v)


def _uniquely_covers(q: Query, chi: dict, t) -> bool:
    for atom in q.atoms:
        e = atom.attr_set
        if e <= chi[t] and not any(e <= chi[u] for u in chi if u != t):
            return True
    return False


def complete_and_minimize(q: Query, d: Ghd) -> Ghd:
    """Prune redundant low-degree nodes, then hang a leaf for each unassigned atom.

    Pruning repeatedly takes the lowest-id node of degree <= 2 that is the
    sole cover of no atom, deletes it, and links its two neighbours if it had
    two. Each atom missing from every ``lam`` then gets a new leaf with
    ``chi = lam = that atom``, attached under the shallowest node whose ``chi``
    contains it (lowest id on ties).
    """
    report = validate_ghd(q, d)
    if not report.ok:
        raise InvalidGhdError(f"input is not a valid GHD:\n{report}", report)
    chi = dict(d.chi_map())
    lam = dict(d.lam_map())
    adj = {v: set(d.neighbors(v)) for v in d.nodes}
    root = d.root

    changed = True
    while changed and len(adj) > 1:
        changed = False
        for t in sorted(adj):
            if len(adj[t]) > 2 or _uniquely_covers(q, chi, t):
                continue
            nbrs = sorted(adj.pop(t))
            for x in nbrs:
                adj[x].discard(t)
            if len(nbrs) == 2:
                a, b = nbrs
                adj[a].add(b)
                adj[b].add(a)
            if t == root:
                root = nbrs[0]
            del chi[t], lam[t]
            changed = True
            break

    edges = {(min(a, b), max(a, b)) for a in adj for b in adj[a]}
    pruned = Ghd.from_edges(q, chi, lam, sorted(edges), root)

    assigned = set().union(*lam.values())
    missing = [a for a in q.atom_ids if a not in assigned]
    if not missing:
        return pruned
    depth = pruned.depths()
    children = {v: list(pruned.children(v)) for v in pruned.nodes}
    next_id = max(chi) + 1
    for a in sorted(missing):
        e = q.edge(a)
        host = min((v for v in chi if v in depth and e <= chi[v]), key=lambda v: (depth[v], v))
        chi[next_id] = e
        lam[next_id] = frozenset({a})
        children[host].append(next_id)
        children[next_id] = []
        next_id += 1
    return Ghd.from_children(q, chi, lam, children, root)
