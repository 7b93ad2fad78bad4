"""Plan execution over the embedded table store.

The executor covers exactly the plan shapes the compiler emits: filtered
scans, hash equi-joins, and matrix-cell predicate filters.  Sources are
materialized freshly on every call (as a database would re-read its
tables), so execution cost tracks index size honestly.  Join order is the
plan's source order refined greedily: the next source taken is the first
one connected to the rows built so far by an equality predicate, which
avoids cross products whenever the plan allows.

Results have set semantics and a deterministic (lexicographic) order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .closure import AnchorNumbering, store_numberings, unpack_matrix
from .errors import BenchTimeout, StorageFailure
from .plan import (
    CellPredicate,
    EqPredicate,
    Plan,
    ROLE_ANCHOR_SCAN,
    ROLE_ARRAY_REF,
    ROLE_CONSTRAINED_ARC,
    ROLE_KSTAR_REF,
    ROLE_WORD_ARC,
    SourceSpec,
)
from .store import TableStore, feature_table_name


@dataclass(frozen=True)
class ResultSet:
    vars: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]  # distinct, sorted

    def to_dicts(self) -> list[dict[str, str]]:
        return [dict(zip(self.vars, row)) for row in self.rows]

    def column(self, var: str) -> list[str]:
        idx = self.vars.index(var)
        return [row[idx] for row in self.rows]


def _materialize(source: SourceSpec, store: TableStore) -> list[dict]:
    if source.role in (ROLE_WORD_ARC, ROLE_CONSTRAINED_ARC):
        ann = store.tables["ANNOTATION"]
        ai, gi = ann.col("AGSETID"), ann.col("AGID")
        ii, si, ei, ti = (
            ann.col("ANNOTATIONID"), ann.col("STARTANCHOR"),
            ann.col("ENDANCHOR"), ann.col("TYPE"),
        )
        rows = [
            {
                "AnnotationId": r[ii], "StartAnchor": r[si],
                "EndAnchor": r[ei], "AGId": r[gi],
            }
            for r in ann.rows
            if r[ai] == source.corpus and r[ti] == source.arc_type
        ]
        if source.role == ROLE_CONSTRAINED_ARC:
            table = store.tables.get(feature_table_name(source.corpus))
            if table is None:
                raise StorageFailure(f"no feature table for {source.corpus!r}")
            col_idx = []
            for fname, fvalue in source.filters:
                col_idx.append((table.col(fname.upper()), fvalue))
            matching = set()
            for r in table.rows:
                if all(r[ci] == fv for ci, fv in col_idx):
                    matching.add(r[0])
            rows = [row for row in rows if row["AnnotationId"] in matching]
        return rows
    if source.role == ROLE_KSTAR_REF:
        table = store.tables.get("KSTAR")
        if table is None:
            raise StorageFailure("closure table KSTAR is missing")
        si, ei, ti = table.col("STARTANCHOR"), table.col("ENDANCHOR"), table.col("TYPE")
        return [
            {"StartAnchor": r[si], "EndAnchor": r[ei]}
            for r in table.rows
            if r[ti] == source.index_tag
        ]
    if source.role == ROLE_ARRAY_REF:
        table = store.tables.get("KSTAR_ARRAY")
        if table is None:
            raise StorageFailure("closure table KSTAR_ARRAY is missing")
        numberings = store_numberings(store, source.corpus)
        gi, ti, mi = table.col("AGID"), table.col("TYPE"), table.col("A")
        rows = []
        for r in table.rows:
            if r[ti] != source.index_tag or r[gi] not in numberings:
                continue
            numbering: AnchorNumbering = numberings[r[gi]]
            rows.append({
                "AGId": r[gi],
                "A": unpack_matrix(r[mi], numbering.n),
                "_numbering": numbering,
            })
        return rows
    if source.role == ROLE_ANCHOR_SCAN:
        table = store.tables["ANCHOR"]
        ai, gi, ii = table.col("AGSETID"), table.col("AGID"), table.col("ANCHORID")
        return [
            {"AnchorId": r[ii], "AGId": r[gi]}
            for r in table.rows
            if r[ai] == source.corpus
        ]
    raise StorageFailure(f"unknown source role {source.role!r}")


def _cell_true(arrays_row: dict, row_anchor: str, col_anchor: str) -> bool:
    numbering: AnchorNumbering = arrays_row["_numbering"]
    i = numbering.index_map.get(row_anchor)
    j = numbering.index_map.get(col_anchor)
    if i is None or j is None:
        return False
    return bool(arrays_row["A"][i - 1, j - 1])


def execute(plan: Plan, store: TableStore, deadline: float | None = None) -> ResultSet:
    """Run the plan; `deadline` (perf_counter value) aborts long executions."""

    def check_deadline() -> None:
        if deadline is not None and time.perf_counter() > deadline:
            raise BenchTimeout("execution exceeded its time budget")

    tables = {s.alias: _materialize(s, store) for s in plan.sources}
    check_deadline()

    eq_preds = [p for p in plan.predicates if isinstance(p, EqPredicate)]
    cell_preds = [p for p in plan.predicates if isinstance(p, CellPredicate)]

    aliases = [s.alias for s in plan.sources]
    bound: dict[str, int] = {}
    rows: list[tuple] = []
    remaining = list(aliases)
    cells_left = list(cell_preds)

    def self_filter(alias: str, source_rows: list[dict]) -> list[dict]:
        conditions = [
            p for p in eq_preds
            if p.left.alias == alias and p.right.alias == alias
        ]
        if not conditions:
            return source_rows
        return [
            r for r in source_rows
            if all(r[p.left.column] == r[p.right.column] for p in conditions)
        ]

    def next_alias() -> str:
        for alias in remaining:
            for p in eq_preds:
                a, b = p.left.alias, p.right.alias
                if (a == alias and b in bound) or (b == alias and a in bound):
                    return alias
        return remaining[0]

    while remaining:
        alias = next_alias() if bound else remaining[0]
        remaining.remove(alias)
        source_rows = self_filter(alias, tables[alias])
        if not bound:
            bound[alias] = 0
            rows = [(r,) for r in source_rows]
        else:
            keys = []  # (bound alias, bound col, new col)
            for p in eq_preds:
                if p.left.alias == alias and p.right.alias in bound:
                    keys.append((p.right.alias, p.right.column, p.left.column))
                elif p.right.alias == alias and p.left.alias in bound:
                    keys.append((p.left.alias, p.left.column, p.right.column))
            position = len(bound)
            bound[alias] = position
            if keys:
                index: dict[tuple, list[dict]] = {}
                new_cols = [k[2] for k in keys]
                for r in source_rows:
                    index.setdefault(tuple(r[c] for c in new_cols), []).append(r)
                joined = []
                for row in rows:
                    probe = tuple(row[bound[a]][c] for a, c, _ in keys)
                    for r in index.get(probe, ()):
                        joined.append(row + (r,))
                rows = joined
            else:
                rows = [row + (r,) for row in rows for r in source_rows]
        # Cell tests run as soon as every referenced source is bound.
        ready = [
            p for p in cells_left
            if p.array_alias in bound and p.row.alias in bound and p.col.alias in bound
        ]
        for p in ready:
            cells_left.remove(p)
            ai, ri, ci = bound[p.array_alias], bound[p.row.alias], bound[p.col.alias]
            rows = [
                row for row in rows
                if _cell_true(row[ai], row[ri][p.row.column], row[ci][p.col.column])
            ]
        check_deadline()

    projected = {
        tuple(row[bound[slot.alias]][slot.column] for _, slot in plan.projection)
        for row in rows
    }
    return ResultSet(
        vars=tuple(var for var, _ in plan.projection),
        rows=tuple(sorted(projected)),
    )
