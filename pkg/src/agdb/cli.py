"""Command-line interface.

Subcommands: import, export, index build, query, bench, validate.  Stores
are addressed by connect string (or bare DSN name) resolved against the
config file named by AG_ODBC_INI.  Results go to stdout (one row per
line, tab-separated bindings); diagnostics go to stderr.  Exit codes:
0 success, 1 usage error, 2 data/policy error, 3 oracle mismatch.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, bench, closure, formats
from .agql import parse_query
from .connect import resolve_connect_string
from .engine import execute
from .errors import AgdbError, UnknownAgset
from .model import validate
from .plan import compile as compile_plan
from .plan import print_sql
from .store import TableStore


def _open_store(connect: str) -> TableStore:
    spec = resolve_connect_string(connect)
    return TableStore(spec.database)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agdb", description=__doc__)
    parser.add_argument("--version", action="version", version=f"agdb {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_import = sub.add_parser("import", help="load aif/tsv files into a store")
    p_import.add_argument("files", nargs="+")
    p_import.add_argument("--dsn", required=True)

    p_export = sub.add_parser("export", help="write one agset as aif or tsv")
    p_export.add_argument("--agset", required=True)
    p_export.add_argument("--format", choices=("aif", "tsv"), default="aif")
    p_export.add_argument("--fields", help="comma-separated feature whitelist")
    p_export.add_argument("--out", help="output path (default stdout)")
    p_export.add_argument("--dsn", required=True)

    p_index = sub.add_parser("index", help="closure index maintenance")
    index_sub = p_index.add_subparsers(dest="index_command", required=True)
    p_build = index_sub.add_parser("build", help="build a closure index")
    p_build.add_argument("--type", required=True)
    p_build.add_argument("--domain")
    p_build.add_argument("--mode", choices=("kstar", "array"), required=True)
    p_build.add_argument("--agset", help="default: every stored agset")
    p_build.add_argument("--dsn", required=True)

    p_query = sub.add_parser("query", help="run (or explain) a query")
    p_query.add_argument("text", nargs="?")
    p_query.add_argument("--file", help="read query text from a file")
    p_query.add_argument("--mode", choices=("kstar", "array"), default="kstar")
    p_query.add_argument("--domain")
    p_query.add_argument("--explain", action="store_true", help="print SQL, run nothing")
    p_query.add_argument("--dsn", required=True)

    p_bench = sub.add_parser("bench", help="generate a corpus and run benchmarks")
    p_bench.add_argument("--scale", type=float, default=0.1)
    p_bench.add_argument("--seed", type=int, default=42)
    p_bench.add_argument("--out", help="write the JSON report here")
    p_bench.add_argument("--runs", type=int, default=5)
    p_bench.add_argument("--long-joins", type=int, default=0, metavar="N")
    p_bench.add_argument("--timeout", type=float, default=20.0)
    p_bench.add_argument("--dsn", help="store the corpus here (default: in memory)")

    p_validate = sub.add_parser("validate", help="check model invariants")
    p_validate.add_argument("--agset", required=True)
    p_validate.add_argument("--dsn", required=True)
    return parser


def _cmd_import(args) -> int:
    store = _open_store(args.dsn)
    for name in args.files:
        data = Path(name).read_bytes()
        agset = formats.import_agset(data)
        store.store_agset(agset)
        print(f"imported {agset.agset_id} ({sum(1 for _ in agset.all_annotations())} annotations)")
    return 0


def _cmd_export(args) -> int:
    store = _open_store(args.dsn)
    agset = store.load_agset(args.agset)
    fields = None if args.fields is None else {f for f in args.fields.split(",") if f}
    fmt = "aif-lite" if args.format == "aif" else "tsv"
    payload = formats.export_filtered(agset, fields, fmt)
    if args.out:
        Path(args.out).write_bytes(payload)
    else:
        sys.stdout.buffer.write(payload)
    return 0


def _cmd_index_build(args) -> int:
    store = _open_store(args.dsn)
    agset_ids = [args.agset] if args.agset else store.agset_ids()
    if args.agset and not store.has_agset(args.agset):
        raise UnknownAgset(f"no such agset: {args.agset!r}")
    stats = []
    for agset_id in agset_ids:
        agset = store.load_agset(agset_id)
        if args.mode == "kstar":
            count = closure.store_kstar(store, agset, args.type, args.domain)
            stats.append({"agset": agset_id, "kind": "kstar",
                          "type": closure.index_tag(args.type, args.domain), "rows": count})
        else:
            count = closure.store_kstar_arrays(store, agset, args.type, args.domain)
            stats.append({"agset": agset_id, "kind": "array",
                          "type": closure.index_tag(args.type, args.domain), "matrices": count})
    print(json.dumps(stats))
    return 0


def _cmd_query(args) -> int:
    if (args.text is None) == (args.file is None):
        print("query: provide query text or --file, not both", file=sys.stderr)
        return 1
    text = args.text if args.text is not None else Path(args.file).read_text(encoding="utf-8")
    ast = parse_query(text)
    store = _open_store(args.dsn)
    mode = "kstar" if args.mode == "kstar" else "kstar-array"
    plan = compile_plan(ast, store, mode=mode, domain_tag=args.domain)
    if args.explain:
        sys.stdout.write(print_sql(plan))
        return 0
    result = execute(plan, store)
    for row in result.rows:
        print("\t".join(row))
    return 0


def _cmd_bench(args) -> int:
    spec = bench.scaled_spec(args.scale, args.seed)
    agset = bench.generate_corpus(spec)
    store = _open_store(args.dsn) if args.dsn else TableStore(None)
    store.store_agset(agset)
    sizes = bench.build_all_indexes(store, agset)
    report = bench.run_benchmarks(agset, store, runs=args.runs, index_sizes=sizes)
    if args.long_joins:
        report.long_joins = bench.run_long_joins(
            agset, store, max_n=args.long_joins, timeout=args.timeout
        )
    if args.out:
        Path(args.out).write_text(report.to_json(), encoding="utf-8")
    print(report.format_table())
    return 0


def _cmd_validate(args) -> int:
    store = _open_store(args.dsn)
    agset = store.load_agset(args.agset)
    violations = validate(agset)
    for v in violations:
        print(str(v))
    if violations:
        print(f"{len(violations)} violation(s)", file=sys.stderr)
        return 2
    print("ok")
    return 0


_HANDLERS = {
    "import": _cmd_import,
    "export": _cmd_export,
    "query": _cmd_query,
    "bench": _cmd_bench,
    "validate": _cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        if args.command == "index":
            return _cmd_index_build(args)
        return _HANDLERS[args.command](args)
    except AgdbError as exc:
        print(f"{exc.module}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"io: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
