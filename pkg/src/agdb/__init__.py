"""Annotation-graph storage, path queries, and closure-indexed search."""

__version__ = "0.1.0"

from .model import AG, AGSet, Anchor, Annotation, FeatureRecord, Signal, Timeline, validate
from .formats import export_filtered, import_agset
from .connect import ConnectSpec, parse_connect_string, resolve_config, resolve_connect_string
from .store import TableStore, emit_sql
from .agql import QueryAst, parse_query, pretty_print, tokenize
from .closure import anchor_num, build_kstar, build_kstar_array, build_kstar_domain
from .plan import Plan, compile, print_sql
from .engine import ResultSet, execute
from .oracle import oracle_match
from .bench import CorpusSpec, generate_corpus, run_benchmarks, run_long_joins

__all__ = [
    "AG", "AGSet", "Anchor", "Annotation", "FeatureRecord", "Signal", "Timeline",
    "validate", "export_filtered", "import_agset", "ConnectSpec",
    "parse_connect_string", "resolve_config", "resolve_connect_string",
    "TableStore", "emit_sql", "QueryAst", "parse_query", "pretty_print", "tokenize",
    "anchor_num", "build_kstar", "build_kstar_array", "build_kstar_domain",
    "Plan", "compile", "print_sql", "ResultSet", "execute", "oracle_match",
    "CorpusSpec", "generate_corpus", "run_benchmarks", "run_long_joins",
    "__version__",
]
