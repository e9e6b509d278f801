"""File formats: query text, relation TSV, GHD JSON."""
from __future__ import annotations

import json
from pathlib import Path

from gymjoin.errors import ParseError
from gymjoin.ghd import Ghd
from gymjoin.query import Query, parse_query
from gymjoin.relation import Relation


def read_query(path) -> Query:
    return parse_query(Path(path).read_text())


def write_query(q: Query, path):
    Path(path).write_text(q.to_text())


def relation_to_tsv(rel: Relation) -> str:
    lines = ["\t".join(rel.schema)]
    lines += ["\t".join(str(v) for v in row) for row in rel.sorted_rows()]
    return "\n".join(lines) + "\n"


def relation_from_tsv(text: str, name: str) -> Relation:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError(f"{name}: missing header row")
    schema = tuple(x.strip() for x in lines[0].split("\t"))
    rows = set()
    for lineno, line in enumerate(lines[1:], 2):
        cells = line.split("\t")
        if len(cells) != len(schema):
            raise ParseError(f"{name} line {lineno}: expected {len(schema)} cells, got {len(cells)}")
        try:
            rows.add(tuple(int(c) for c in cells))
        except ValueError:
            raise ParseError(f"{name} line {lineno}: non-integer cell in {line!r}") from None
    try:
        return Relation(name, schema, frozenset(rows))
    except ValueError as exc:
        raise ParseError(f"{name}: {exc}") from None


def load_relation(path, name: str | None = None) -> Relation:
    path = Path(path)
    return relation_from_tsv(path.read_text(), name or path.stem)


def dump_relation(rel: Relation, path):
    Path(path).write_text(relation_to_tsv(rel))


def load_database(directory, names) -> dict[str, Relation]:
    """``<name>.tsv`` for every relation name."""
    directory = Path(directory)
    db = {}
    for name in names:
        path = directory / f"{name}.tsv"
        if not path.exists():
            raise ParseError(f"no data file {path}")
        db[name] = load_relation(path, name)
    return db


def dump_database(db, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, rel in sorted(db.items()):
        dump_relation(rel, directory / f"{name}.tsv")


def ghd_to_json(d: Ghd) -> str:
    return json.dumps(d.to_json_obj(), indent=2) + "\n"


def ghd_from_json_obj(q: Query, obj) -> Ghd:
    try:
        root = obj["root"]
        nodes = obj["nodes"]
        chi, lam, children = {}, {}, {}
        for n in nodes:
            v = n["id"]
            if not isinstance(v, int) or v in chi:
                raise ParseError(f"bad or repeated node id {v!r}")
            chi[v] = frozenset(str(x) for x in n["chi"])
            lam[v] = frozenset(int(a) for a in n["lambda"])
            children[v] = [int(c) for c in n.get("children", [])]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed GHD document: {exc!r}") from None
    if not isinstance(root, int):
        raise ParseError(f"root must be an integer id, got {root!r}")
    return Ghd.from_children(q, chi, lam, children, root)


def ghd_from_json(q: Query, text: str) -> Ghd:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"GHD file is not JSON: {exc}") from None
    return ghd_from_json_obj(q, obj)


def load_ghd(q: Query, path) -> Ghd:
    return ghd_from_json(q, Path(path).read_text())


def dump_ghd(d: Ghd, path):
    Path(path).write_text(ghd_to_json(d))


def dumps_json(obj) -> str:
    """Stable JSON text for reports."""
    return json.dumps(obj, indent=2) + "\n"
