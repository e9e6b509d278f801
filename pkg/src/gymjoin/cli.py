"""Command line: validate and transform GHDs, run the join engines.

Exit codes: 0 ok, 1 invalid GHD, 2 input or usage error, 3 simulator
abort, 4 engine output differs from the oracle.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from gymjoin import io
from gymjoin.bsp import MachineConfig
from gymjoin.engine import ENGINES, run_engine
from gymjoin.errors import GymError, InvalidGhdError, OracleBudgetExceeded, SimulatorAbort
from gymjoin.fixtures import fixture_ghd, fixture_query, gen_data, normalize_family
from gymjoin.ghd import stats, validate_ghd
from gymjoin.query import input_size, oracle_join
from gymjoin.transform import c_gta_then_log, log_gta_run

EXIT_OK, EXIT_INVALID, EXIT_INPUT, EXIT_ABORT, EXIT_MISMATCH = 0, 1, 2, 3, 4


class UsageError(GymError):
    pass


def parse_fixture(text: str):
    """``family:n[:group[:nodes]]``, e.g. ``TC_n:15`` or ``C_n_grouped:16:3:7``."""
    parts = text.split(":")
    if len(parts) < 2:
        raise UsageError(f"fixture must look like family:n, got {text!r}")
    try:
        family = normalize_family(parts[0])
        nums = [int(x) for x in parts[1:]]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    n = nums[0]
    group = nums[1] if len(nums) > 1 else 1
    nodes = nums[2] if len(nums) > 2 else None
    return family, n, group, nodes


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("GYM_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"GYM_SEED must be an integer, got {env!r}") from None
    return 0


def _load_query_and_ghd(args):
    if args.fixture:
        family, n, group, nodes = parse_fixture(args.fixture)
        q = fixture_query(family, n)
        d = io.load_ghd(q, args.ghd) if args.ghd else fixture_ghd(family, n, group, nodes)
        return q, d
    if not args.query or not args.ghd:
        raise UsageError("give --fixture, or both --query and --ghd")
    q = io.read_query(args.query)
    return q, io.load_ghd(q, args.ghd)


def _ensure_valid(q, d):
    report = validate_ghd(q, d)
    if not report.ok:
        raise InvalidGhdError(f"invalid GHD:\n{report}", report)


def _apply_transform(d, mode: str, trace_path=None):
    if mode in (None, "none"):
        return d
    if mode == "loggta":
        res = log_gta_run(d)
        if trace_path:
            Path(trace_path).write_text("".join(json.dumps(t) + "\n" for t in res.trace))
        return res.ghd
    if mode.startswith("cgta:"):
        try:
            i = int(mode.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad transform {mode!r}; expected cgta:<passes>") from None
        if trace_path:
            raise UsageError("--trace is only available for loggta")
        return c_gta_then_log(d, i)
    raise UsageError(f"unknown transform {mode!r}; expected none, loggta or cgta:<passes>")


def _emit(obj, path):
    text = io.dumps_json(obj)
    if path:
        Path(path).write_text(text)
    sys.stdout.write(text)


def cmd_validate(args) -> int:
    q, d = _load_query_and_ghd(args)
    report = validate_ghd(q, d)
    if not report.ok:
        print(str(report), file=sys.stderr)
        return EXIT_INVALID
    _emit(stats(d, args.iw_budget).to_json_obj(), args.report)
    return EXIT_OK


def cmd_transform(args) -> int:
    q, d = _load_query_and_ghd(args)
    _ensure_valid(q, d)
    before = stats(d).to_json_obj()
    out = _apply_transform(d, args.transform, args.trace)
    after = stats(out).to_json_obj()
    if args.out:
        io.dump_ghd(out, args.out)
    _emit({"transform": args.transform, "before": before, "after": after}, args.report)
    return EXIT_OK


def cmd_run(args) -> int:
    seed = _seed(args)
    q, d = _load_query_and_ghd(args)
    if args.data:
        db = io.load_database(args.data, q.relation_names())
    elif args.fixture:
        db = gen_data(q, seed, args.domain, args.rows, args.matching)
    else:
        raise UsageError("--data is required with --query")
    _ensure_valid(q, d)
    d = _apply_transform(d, args.transform, args.trace)
    cfg = MachineConfig(M=args.memory, seed=seed)
    doc = {
        "engine": args.engine,
        "transform": args.transform,
        "memory": args.memory,
        "seed": seed,
        "input_size": input_size(q, db),
        "ghd": stats(d).to_json_obj(),
    }
    try:
        result = run_engine(args.engine, q, d, db, cfg)
    except SimulatorAbort as exc:
        doc["error"] = str(exc)
        if exc.ledger is not None:
            doc["ledger"] = exc.ledger.to_json_obj()
        _emit(doc, args.report)
        print(f"simulator abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    doc.update(result.to_json_obj())
    if args.max_intermediate_watch:
        doc["intermediate_within_out"] = result.max_intermediate <= len(result.output)
    status = EXIT_OK
    if args.check_oracle:
        try:
            expected = oracle_join(q, db, limit=args.oracle_budget)
        except OverflowError:
            raise OracleBudgetExceeded(f"oracle output exceeds --oracle-budget {args.oracle_budget}") from None
        match = expected.same_rows(result.output)
        doc["oracle"] = "match" if match else "mismatch"
        if not match:
            status = EXIT_MISMATCH
    if args.out:
        io.dump_relation(result.output, args.out)
    _emit(doc, args.report)
    return status


def cmd_generate(args) -> int:
    seed = _seed(args)
    family, n, group, nodes = parse_fixture(args.fixture)
    q = fixture_query(family, n)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    io.write_query(q, outdir / "query.txt")
    io.dump_ghd(fixture_ghd(family, n, group, nodes), outdir / "ghd.json")
    io.dump_database(gen_data(q, seed, args.domain, args.rows, args.matching), outdir / "data")
    return EXIT_OK


def _add_source(p, data=False):
    p.add_argument("--query", help="query text file, one Name(A,B,...) atom per line")
    p.add_argument("--ghd", help="GHD JSON file")
    p.add_argument("--fixture", help="built-in family instead of files: family:n[:group[:nodes]]")
    if data:
        p.add_argument("--data", help="directory with one <relation>.tsv per relation")


def _add_datagen(p):
    p.add_argument("--seed", type=int, default=None, help="random seed (default: $GYM_SEED or 0)")
    p.add_argument("--domain", type=int, default=8, help="values drawn from 1..domain")
    p.add_argument("--rows", type=int, default=16, help="rows drawn per relation")
    p.add_argument("--matching", action="store_true", help="skew-free data: columns from permutations")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gymjoin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a GHD and print its stats")
    _add_source(p)
    p.add_argument("--iw-budget", type=int, default=None, help="largest cover size tried for iw")
    p.add_argument("--report", help="also write the stats JSON here")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("transform", help="reduce GHD depth")
    _add_source(p)
    p.add_argument("--transform", required=True, help="loggta or cgta:<passes>")
    p.add_argument("--out", help="write the transformed GHD here")
    p.add_argument("--report", help="write before/after stats here")
    p.add_argument("--trace", help="write one JSON line per inactivation (loggta)")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("run", help="evaluate the query with one engine")
    _add_source(p, data=True)
    _add_datagen(p)
    p.add_argument("--engine", choices=ENGINES, default="gym")
    p.add_argument("--transform", default="none", help="none, loggta or cgta:<passes>")
    p.add_argument("--memory", type=int, default=64, help="reducer memory M in tuples")
    p.add_argument("--trace", help="write the loggta inactivation trace here")
    p.add_argument("--check-oracle", action="store_true", help="compare against the brute-force join")
    p.add_argument("--oracle-budget", type=int, default=1_000_000, help="row cap for the brute-force join")
    p.add_argument("--max-intermediate-watch", action="store_true", help="report whether join-phase sizes stay <= OUT")
    p.add_argument("--out", help="write the output relation as TSV")
    p.add_argument("--report", help="write the run report JSON")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("generate", help="write a fixture query, GHD and data to a directory")
    p.add_argument("--fixture", required=True)
    _add_datagen(p)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidGhdError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    except SimulatorAbort as exc:
        print(f"simulator abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (GymError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
