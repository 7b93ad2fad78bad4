"""Embedded relational persistence for annotation graphs.

The store keeps seven fixed tables (AGSET, AG, TIMELINE, SIGNAL,
ANNOTATION, ANCHOR, METADATA) plus one feature table per corpus: one
column per distinct feature name and an ANNOTATIONID key column.  Feature
names are case-folded to upper-case column names; the original spelling is
kept in a FEATURE_NAMES side table so loads restore exact names.

Backends: ``embedded`` persists one TSV file per table under a root
directory (``<TABLE>.tsv``, ``<corpus>.feature.tsv``, ``VERSIONS.tsv``);
``emit_sql`` produces an ANSI SQL script for loading the same content into
an external server.

Collaboration support: per-(corpus, role) column policies making feature
columns read-only, and optimistic per-row versioning with compare-and-swap
semantics standing in for record-level locking.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field
from pathlib import Path

from . import tsvio
from .errors import (
    PolicyViolation,
    StorageFailure,
    UnknownAgset,
    UnknownAnnotation,
    VersionConflict,
)
from .model import AG, AGSet, check_feature_name, validate

# Fixed-table DDL, emitted verbatim by emit_sql (including the missing
# comma before TIMELINE's FOREIGN KEY line, preserved for golden fidelity).
SCHEMA_DDL: dict[str, str] = {
    "AGSET": """CREATE TABLE AGSET (
  AGSETID     VARCHAR(50) NOT NULL,
  VERSION     CHAR(10),
  XMLNS       CHAR(30),
  XLINK       CHAR(30),
  PRIMARY KEY (AGSETID))""",
    "AG": """CREATE TABLE AG (
  AGID        VARCHAR(50) NOT NULL,
  AGSETID     VARCHAR(50) NOT NULL,
  TIMELINEID  VARCHAR(50),
  TYPE        CHAR(10),
  PRIMARY KEY (AGID),
  FOREIGN KEY (AGSETID) REFERENCES AGSET)""",
    "TIMELINE": """CREATE TABLE TIMELINE (
  AGSETID     VARCHAR(50) NOT NULL,
  TIMELINEID  VARCHAR(50) NOT NULL,
  PRIMARY KEY (TIMELINEID)
  FOREIGN KEY (AGSETID) REFERENCES AGSET)""",
    "SIGNAL": """CREATE TABLE SIGNAL (
  AGSETID     VARCHAR(50) NOT NULL,
  TIMELINEID  VARCHAR(50) NOT NULL,
  SIGNALID    VARCHAR(50) NOT NULL,
  MIMECLASS   VARCHAR(50),
  MIMETYPE    VARCHAR(50),
  ENCODING    VARCHAR(50),
  UNIT        VARCHAR(50),
  XLINKTYPE   VARCHAR(50),
  XLINKHREF   VARCHAR(50),
  TRACK       VARCHAR(50),
  PRIMARY KEY (SIGNALID),
  FOREIGN KEY (AGSETID) REFERENCES AGSET,
  FOREIGN KEY (TIMELINEID) REFERENCES TIMELINE)""",
    "ANNOTATION": """CREATE TABLE ANNOTATION (
  AGSETID      VARCHAR(50) NOT NULL,
  AGID         VARCHAR(50) NOT NULL,
  ANNOTATIONID VARCHAR(50) NOT NULL,
  STARTANCHOR  VARCHAR(50),
  ENDANCHOR    VARCHAR(50),
  TYPE         VARCHAR(50),
  PRIMARY KEY (ANNOTATIONID),
  FOREIGN KEY (AGID) REFERENCES AG,
  FOREIGN KEY (AGSETID) REFERENCES AGSET)""",
    "ANCHOR": """CREATE TABLE ANCHOR (
  AGSETID     VARCHAR(50) NOT NULL,
  AGID        VARCHAR(50) NOT NULL,
  ANCHORID    VARCHAR(50) NOT NULL,
  OFFSET      FLOAT,
  UNIT        VARCHAR(50),
  SIGNALS     VARCHAR(50),
  PRIMARY KEY (ANCHORID),
  FOREIGN KEY (AGID) REFERENCES AG,
  FOREIGN KEY (AGSETID) REFERENCES AGSET)""",
    "METADATA": """CREATE TABLE METADATA (
  AGSETID     VARCHAR(50) NOT NULL,
  AGID        VARCHAR(50),
  ID          VARCHAR(50) NOT NULL,
  NAME        VARCHAR(50) NOT NULL,
  VALUE       TEXT,
  PRIMARY KEY (ID,NAME),
  FOREIGN KEY (AGSETID) REFERENCES AGSET)""",
}

FIXED_TABLE_ORDER = ("AGSET", "AG", "TIMELINE", "SIGNAL", "ANNOTATION", "ANCHOR", "METADATA")

FIXED_COLUMNS: dict[str, tuple[str, ...]] = {
    "AGSET": ("AGSETID", "VERSION", "XMLNS", "XLINK"),
    "AG": ("AGID", "AGSETID", "TIMELINEID", "TYPE"),
    "TIMELINE": ("AGSETID", "TIMELINEID"),
    "SIGNAL": ("AGSETID", "TIMELINEID", "SIGNALID", "MIMECLASS", "MIMETYPE",
               "ENCODING", "UNIT", "XLINKTYPE", "XLINKHREF", "TRACK"),
    "ANNOTATION": ("AGSETID", "AGID", "ANNOTATIONID", "STARTANCHOR", "ENDANCHOR", "TYPE"),
    "ANCHOR": ("AGSETID", "AGID", "ANCHORID", "OFFSET", "UNIT", "SIGNALS"),
    "METADATA": ("AGSETID", "AGID", "ID", "NAME", "VALUE"),
}

PRIMARY_KEYS: dict[str, tuple[str, ...]] = {
    "AGSET": ("AGSETID",),
    "AG": ("AGID",),
    "TIMELINE": ("TIMELINEID",),
    "SIGNAL": ("SIGNALID",),
    "ANNOTATION": ("ANNOTATIONID",),
    "ANCHOR": ("ANCHORID",),
    "METADATA": ("ID", "NAME"),
}

# Auxiliary tables; VERSIONS holds the optimistic row versions, the others
# keep column-name spellings and the registry of built closure indexes.
AUX_COLUMNS: dict[str, tuple[str, ...]] = {
    "VERSIONS": ("ANNOTATIONID", "VERSION"),
    "FEATURE_NAMES": ("CORPUS", "COLUMN", "NAME"),
    "INDEXES": ("AGSETID", "KIND", "TYPE"),
}

KSTAR_COLUMNS = ("STARTANCHOR", "ENDANCHOR", "TYPE")
KSTAR_ARRAY_COLUMNS = ("AGID", "TYPE", "A")

_VARCHAR_LIMITS: dict[tuple[str, str], int] = {}
for _table, _ddl in SCHEMA_DDL.items():
    for _col, _kind, _n in re.findall(r"^\s*(\w+)\s+(VARCHAR|CHAR)\((\d+)\)", _ddl, re.M):
        _VARCHAR_LIMITS[(_table, _col)] = int(_n)


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list] = field(default_factory=list)

    def col(self, name: str) -> int:
        return self.columns.index(name)


@dataclass(frozen=True)
class FeatureTableDiff:
    added: list[str]
    dropped: list[str]


@dataclass(frozen=True)
class ColumnPolicy:
    corpus: str
    role: str
    readonly_columns: frozenset[str]


def feature_table_name(corpus: str) -> str:
    return corpus.upper()


def _check_len(table: str, col: str, value: str | None) -> None:
    limit = _VARCHAR_LIMITS.get((table, col))
    if limit is not None and value is not None and len(value) > limit:
        raise StorageFailure(
            f"{table}.{col} value exceeds {limit} characters: {value!r}"
        )


class TableStore:
    """Embedded table store; in-memory when `root` is None."""

    def __init__(self, root: str | Path | None = None):
        self.root = Path(root) if root is not None else None
        self.tables: dict[str, Table] = {}
        self.feature_tables: set[str] = set()
        self.policies: dict[tuple[str, str], ColumnPolicy] = {}
        self._lock = threading.RLock()
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
        self._open()

    # -- lifecycle ------------------------------------------------------

    def _open(self) -> None:
        for name in FIXED_TABLE_ORDER:
            self._load_or_create(name, list(FIXED_COLUMNS[name]), fixed=True)
        for name, cols in AUX_COLUMNS.items():
            self._load_or_create(name, list(cols))
        if self.root is not None:
            for path in sorted(self.root.glob("*.feature.tsv")):
                corpus = path.name[: -len(".feature.tsv")]
                table = self._read_file(path, f"feature table {corpus}")
                if not table.columns or table.columns[0] != "ANNOTATIONID":
                    raise StorageFailure(
                        f"feature table {corpus} must start with ANNOTATIONID"
                    )
                table.name = corpus
                self.tables[corpus] = table
                self.feature_tables.add(corpus)
            for name in ("KSTAR", "KSTAR_ARRAY"):
                path = self.root / f"{name}.tsv"
                if path.exists():
                    table = self._read_file(path, name)
                    table.name = name
                    self.tables[name] = table
        self._check_integrity()
        self._reindex()

    def _load_or_create(self, name: str, columns: list[str], fixed: bool = False) -> None:
        path = None if self.root is None else self.root / f"{name}.tsv"
        if path is not None and path.exists():
            table = self._read_file(path, name)
            table.name = name
            if fixed and table.columns != columns:
                raise StorageFailure(
                    f"table {name} has columns {table.columns}, expected {columns}"
                )
        else:
            table = Table(name, list(columns))
            if path is not None:
                self._persist(table)
        self.tables[name] = table

    def _read_file(self, path: Path, what: str) -> Table:
        lines = path.read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if not lines:
            raise StorageFailure(f"{what}: missing header row")
        columns = [c or "" for c in tsvio.parse_row(lines[0])]
        table = Table(path.stem, columns)
        is_anchor = path.stem == "ANCHOR"
        offset_idx = columns.index("OFFSET") if is_anchor and "OFFSET" in columns else None
        for line in lines[1:]:
            cells = tsvio.parse_row(line)
            if len(cells) != len(columns):
                raise StorageFailure(f"{what}: row width mismatch")
            row: list = list(cells)
            if offset_idx is not None and row[offset_idx] is not None:
                row[offset_idx] = float(row[offset_idx])
            table.rows.append(row)
        return table

    def _persist(self, table: Table) -> None:
        if self.root is None:
            return
        if table.name in self.feature_tables:
            path = self.root / f"{table.name}.feature.tsv"
        else:
            path = self.root / f"{table.name}.tsv"
        with path.open("w", encoding="utf-8") as fh:
            fh.write(tsvio.format_row(list(table.columns)))
            offset_idx = table.columns.index("OFFSET") if table.name == "ANCHOR" else None
            for row in table.rows:
                cells = list(row)
                if offset_idx is not None and cells[offset_idx] is not None:
                    cells[offset_idx] = repr(cells[offset_idx])
                fh.write(tsvio.format_row(cells))

    def _check_integrity(self) -> None:
        for name, pk in PRIMARY_KEYS.items():
            table = self.tables[name]
            idxs = [table.col(c) for c in pk]
            seen: set[tuple] = set()
            for row in table.rows:
                key = tuple(row[i] for i in idxs)
                if key in seen:
                    raise StorageFailure(f"duplicate primary key {key} in {name}")
                seen.add(key)
        agset_ids = {r[0] for r in self.tables["AGSET"].rows}
        for name in ("AG", "TIMELINE", "SIGNAL", "ANNOTATION", "ANCHOR", "METADATA"):
            table = self.tables[name]
            idx = table.col("AGSETID")
            for row in table.rows:
                if row[idx] not in agset_ids:
                    raise StorageFailure(f"{name} row references unknown AGSET {row[idx]!r}")
        ag_ids = {r[self.tables['AG'].col('AGID')] for r in self.tables["AG"].rows}
        for name in ("ANNOTATION", "ANCHOR"):
            table = self.tables[name]
            idx = table.col("AGID")
            for row in table.rows:
                if row[idx] not in ag_ids:
                    raise StorageFailure(f"{name} row references unknown AG {row[idx]!r}")

    def _reindex(self) -> None:
        ann = self.tables["ANNOTATION"]
        self._ann_rows = {
            row[ann.col("ANNOTATIONID")]: row for row in ann.rows
        }
        versions = self.tables["VERSIONS"]
        self._version_rows = {
            row[versions.col("ANNOTATIONID")]: row for row in versions.rows
        }

    def flush(self) -> None:
        with self._lock:
            for table in self.tables.values():
                self._persist(table)

    # -- generic helpers -------------------------------------------------

    def ensure_table(self, name: str, columns: tuple[str, ...]) -> Table:
        table = self.tables.get(name)
        if table is None:
            table = Table(name, list(columns))
            self.tables[name] = table
            self._persist(table)
        return table

    def agset_ids(self) -> list[str]:
        return [row[0] for row in self.tables["AGSET"].rows]

    def has_agset(self, agset_id: str) -> bool:
        return any(row[0] == agset_id for row in self.tables["AGSET"].rows)

    def feature_columns(self, corpus: str) -> list[str]:
        table = self.tables.get(feature_table_name(corpus))
        if table is None:
            return []
        return list(table.columns)

    def original_feature_name(self, corpus: str, column: str) -> str:
        names = self.tables["FEATURE_NAMES"]
        for row in names.rows:
            if row[0] == feature_table_name(corpus) and row[1] == column:
                return row[2]
        return column

    # -- storing ----------------------------------------------------------

    def store_agset(self, agset: AGSet) -> None:
        """Write every row for `agset`, replacing a previously stored copy."""
        with self._lock:
            violations = validate(agset)
            if violations:
                raise StorageFailure(
                    "agset is not valid: " + "; ".join(str(v) for v in violations[:5])
                )
            self._check_lengths(agset)
            self._check_store_conflicts(agset)
            feature_names = sorted(agset.feature_names())
            self._check_feature_name_collisions(feature_names)
            self._delete_agset_rows(agset.agset_id)

            t = self.tables["AGSET"]
            t.rows.append([agset.agset_id, agset.version, agset.xmlns, agset.xlink])
            for tl in sorted(agset.timelines.values(), key=lambda x: x.timeline_id):
                self.tables["TIMELINE"].rows.append([agset.agset_id, tl.timeline_id])
                for sig in sorted(tl.signals.values(), key=lambda s: s.signal_id):
                    self.tables["SIGNAL"].rows.append([
                        agset.agset_id, tl.timeline_id, sig.signal_id, sig.mimeclass,
                        sig.mimetype, sig.encoding, sig.unit, sig.xlinktype,
                        sig.xlinkhref, sig.track,
                    ])
            for ag in sorted(agset.ags.values(), key=lambda x: x.ag_id):
                self.tables["AG"].rows.append(
                    [ag.ag_id, agset.agset_id, ag.timeline_id, ag.type]
                )
                for anchor in sorted(ag.anchors.values(), key=lambda a: a.anchor_id):
                    self.tables["ANCHOR"].rows.append([
                        agset.agset_id, ag.ag_id, anchor.anchor_id, anchor.offset,
                        anchor.unit, " ".join(anchor.signal_ids),
                    ])
            for (owner, name), value in sorted(agset.metadata.items()):
                owner_ag = owner if owner in agset.ags else None
                self.tables["METADATA"].rows.append(
                    [agset.agset_id, owner_ag, owner, name, value]
                )

            corpus_table = self._rebuild_feature_table(agset.agset_id, feature_names)
            name_to_col = {
                self.original_feature_name(agset.agset_id, col): col
                for col in corpus_table.columns[1:]
            }
            versions = self.tables["VERSIONS"]
            for ag in sorted(agset.ags.values(), key=lambda x: x.ag_id):
                for ann in sorted(ag.annotations.values(), key=lambda a: a.annotation_id):
                    self.tables["ANNOTATION"].rows.append([
                        agset.agset_id, ag.ag_id, ann.annotation_id,
                        ann.start_anchor, ann.end_anchor, ann.type,
                    ])
                    frow: list = [ann.annotation_id] + [None] * (len(corpus_table.columns) - 1)
                    for fname, fvalue in ann.features.items():
                        frow[corpus_table.columns.index(name_to_col[fname])] = fvalue
                    corpus_table.rows.append(frow)
                    prior = self._version_rows.get(ann.annotation_id)
                    if prior is None:
                        versions.rows.append([ann.annotation_id, "1"])
                    else:
                        prior[1] = str(int(prior[1]) + 1)
            self._reindex()
            for name in FIXED_TABLE_ORDER:
                self._persist(self.tables[name])
            for name in ("VERSIONS", "FEATURE_NAMES", "INDEXES"):
                self._persist(self.tables[name])
            self._persist(corpus_table)
            for name in ("KSTAR", "KSTAR_ARRAY"):
                if name in self.tables:
                    self._persist(self.tables[name])

    def _check_lengths(self, agset: AGSet) -> None:
        _check_len("AGSET", "AGSETID", agset.agset_id)
        _check_len("AGSET", "VERSION", agset.version)
        _check_len("AGSET", "XMLNS", agset.xmlns)
        _check_len("AGSET", "XLINK", agset.xlink)
        for tl in agset.timelines.values():
            _check_len("TIMELINE", "TIMELINEID", tl.timeline_id)
            for sig in tl.signals.values():
                for col, value in (
                    ("SIGNALID", sig.signal_id), ("MIMECLASS", sig.mimeclass),
                    ("MIMETYPE", sig.mimetype), ("ENCODING", sig.encoding),
                    ("UNIT", sig.unit), ("XLINKTYPE", sig.xlinktype),
                    ("XLINKHREF", sig.xlinkhref), ("TRACK", sig.track),
                ):
                    _check_len("SIGNAL", col, value)
        for ag in agset.ags.values():
            _check_len("AG", "AGID", ag.ag_id)
            _check_len("AG", "TIMELINEID", ag.timeline_id)
            _check_len("AG", "TYPE", ag.type)
            for anchor in ag.anchors.values():
                _check_len("ANCHOR", "ANCHORID", anchor.anchor_id)
                _check_len("ANCHOR", "UNIT", anchor.unit)
                joined = " ".join(anchor.signal_ids)
                if any(" " in s for s in anchor.signal_ids):
                    raise StorageFailure(
                        f"signal ids with spaces cannot be stored: {anchor.signal_ids}"
                    )
                _check_len("ANCHOR", "SIGNALS", joined)
            for ann in ag.annotations.values():
                _check_len("ANNOTATION", "ANNOTATIONID", ann.annotation_id)
                _check_len("ANNOTATION", "TYPE", ann.type)
        for (owner, name) in agset.metadata:
            _check_len("METADATA", "ID", owner)
            _check_len("METADATA", "NAME", name)

    def _check_store_conflicts(self, agset: AGSet) -> None:
        """Primary keys are store-wide: ids may not collide across AGSets."""

        def foreign(table: str, key_col: str) -> set:
            t = self.tables[table]
            ki, ai = t.col(key_col), t.col("AGSETID")
            return {row[ki] for row in t.rows if row[ai] != agset.agset_id}

        for tl_id in agset.timelines:
            if tl_id in foreign("TIMELINE", "TIMELINEID"):
                raise StorageFailure(f"timeline id {tl_id!r} used by another agset")
        signals = {s for tl in agset.timelines.values() for s in tl.signals}
        taken = foreign("SIGNAL", "SIGNALID")
        for sid in signals:
            if sid in taken:
                raise StorageFailure(f"signal id {sid!r} used by another agset")
        taken = foreign("AG", "AGID")
        for ag_id in agset.ags:
            if ag_id in taken:
                raise StorageFailure(f"ag id {ag_id!r} used by another agset")
        taken = foreign("ANCHOR", "ANCHORID")
        anchor_seen: set[str] = set()
        for ag in agset.ags.values():
            for anchor_id in ag.anchors:
                if anchor_id in taken:
                    raise StorageFailure(f"anchor id {anchor_id!r} used by another agset")
                if anchor_id in anchor_seen:
                    raise StorageFailure(
                        f"anchor id {anchor_id!r} appears in two graphs; ids must be store-unique"
                    )
                anchor_seen.add(anchor_id)
        taken = foreign("ANNOTATION", "ANNOTATIONID")
        for ag in agset.ags.values():
            for ann_id in ag.annotations:
                if ann_id in taken:
                    raise StorageFailure(f"annotation id {ann_id!r} used by another agset")

    def _check_feature_name_collisions(self, names: list[str]) -> None:
        by_upper: dict[str, str] = {}
        for name in names:
            check_feature_name(name)
            upper = name.upper()
            if upper == "ANNOTATIONID":
                raise StorageFailure("feature name ANNOTATIONID is reserved")
            if upper in by_upper and by_upper[upper] != name:
                raise StorageFailure(
                    f"feature names {by_upper[upper]!r} and {name!r} collide case-insensitively"
                )
            by_upper[upper] = name

    def _delete_agset_rows(self, agset_id: str) -> None:
        ann_table = self.tables["ANNOTATION"]
        removed_anchors = {
            row[self.tables["ANCHOR"].col("ANCHORID")]
            for row in self.tables["ANCHOR"].rows
            if row[self.tables["ANCHOR"].col("AGSETID")] == agset_id
        }
        removed_ags = {
            row[self.tables["AG"].col("AGID")]
            for row in self.tables["AG"].rows
            if row[self.tables["AG"].col("AGSETID")] == agset_id
        }
        removed_anns = {
            row[ann_table.col("ANNOTATIONID")]
            for row in ann_table.rows
            if row[ann_table.col("AGSETID")] == agset_id
        }
        for name in FIXED_TABLE_ORDER:
            table = self.tables[name]
            idx = table.col("AGSETID")
            table.rows = [row for row in table.rows if row[idx] != agset_id]
        corpus_table = self.tables.get(feature_table_name(agset_id))
        if corpus_table is not None:
            corpus_table.rows = [r for r in corpus_table.rows if r[0] not in removed_anns]
        # Closure indexes over replaced content are stale: drop rows and
        # registry entries so queries fail fast until a rebuild.
        kstar = self.tables.get("KSTAR")
        if kstar is not None:
            si, ei = kstar.col("STARTANCHOR"), kstar.col("ENDANCHOR")
            kstar.rows = [
                r for r in kstar.rows
                if r[si] not in removed_anchors and r[ei] not in removed_anchors
            ]
        arrays = self.tables.get("KSTAR_ARRAY")
        if arrays is not None:
            gi = arrays.col("AGID")
            arrays.rows = [r for r in arrays.rows if r[gi] not in removed_ags]
        registry = self.tables["INDEXES"]
        registry.rows = [r for r in registry.rows if r[0] != agset_id]

    def _rebuild_feature_table(self, corpus: str, feature_names: list[str]) -> Table:
        table_name = feature_table_name(corpus)
        self.feature_tables.add(table_name)
        self.evolve_feature_table(corpus, set(feature_names))
        return self.tables[table_name]

    # -- feature-table evolution -----------------------------------------

    def evolve_feature_table(self, corpus: str, new_feature_names: set[str]) -> FeatureTableDiff:
        """Make the corpus feature table's columns match `new_feature_names`.

        Shared columns keep their values; dropped columns lose theirs (the
        returned diff lets callers warn before data disappears).
        """
        with self._lock:
            for name in new_feature_names:
                check_feature_name(name)
            self._check_feature_name_collisions(sorted(new_feature_names))
            table_name = feature_table_name(corpus)
            self.feature_tables.add(table_name)
            table = self.tables.get(table_name)
            if table is None:
                table = Table(table_name, ["ANNOTATIONID"])
                self.tables[table_name] = table
            wanted = {name.upper(): name for name in new_feature_names}
            current = table.columns[1:]
            added = sorted(u for u in wanted if u not in current)
            dropped = sorted(c for c in current if c not in wanted)
            if added or dropped:
                keep = [c for c in current if c in wanted]
                new_columns = ["ANNOTATIONID"] + keep + added
                old_index = {c: table.col(c) for c in keep}
                new_rows = []
                for row in table.rows:
                    new_rows.append(
                        [row[0]] + [row[old_index[c]] for c in keep] + [None] * len(added)
                    )
                table.columns = new_columns
                table.rows = new_rows
            names = self.tables["FEATURE_NAMES"]
            names.rows = [
                r for r in names.rows
                if not (r[0] == table_name and (r[1] in dropped or r[1] in wanted))
            ]
            for upper, original in sorted(wanted.items()):
                names.rows.append([table_name, upper, original])
            self._persist(table)
            self._persist(names)
            return FeatureTableDiff(added=added, dropped=dropped)

    # -- column policies and row versions ---------------------------------

    def set_column_policy(self, corpus: str, role: str, readonly_columns: set[str]) -> None:
        table = self.tables.get(feature_table_name(corpus))
        columns = set(table.columns[1:]) if table is not None else set()
        normalized = frozenset(c.upper() for c in readonly_columns)
        unknown = normalized - columns
        if unknown:
            raise StorageFailure(
                f"policy names columns absent from {feature_table_name(corpus)}: {sorted(unknown)}"
            )
        self.policies[(corpus, role)] = ColumnPolicy(corpus, role, normalized)

    def row_version(self, annotation_id: str) -> int:
        row = self._version_rows.get(annotation_id)
        if row is None:
            raise UnknownAnnotation(f"no such annotation: {annotation_id!r}")
        return int(row[1])

    def update_features(
        self,
        annotation_id: str,
        changes: dict[str, str],
        role: str,
        expected_version: int,
    ) -> int:
        """Apply `changes` atomically under the role's column policy.

        Optimistic concurrency: the caller passes the version it read; a
        stale version means another writer won and the update is refused.
        """
        with self._lock:
            ann_row = self._ann_rows.get(annotation_id)
            if ann_row is None:
                raise UnknownAnnotation(f"no such annotation: {annotation_id!r}")
            agset_id = ann_row[self.tables["ANNOTATION"].col("AGSETID")]
            policy = self.policies.get((agset_id, role))
            readonly = policy.readonly_columns if policy else frozenset()
            for name in changes:
                check_feature_name(name)
                if name.upper() in readonly:
                    raise PolicyViolation(
                        f"column {name.upper()} is read-only for role {role!r}"
                    )
            version_row = self._version_rows[annotation_id]
            current = int(version_row[1])
            if expected_version != current:
                raise VersionConflict(
                    f"expected version {expected_version}, row is at {current}"
                )
            table_name = feature_table_name(agset_id)
            table = self.tables[table_name]
            missing = {
                name for name in changes if name.upper() not in table.columns[1:]
            }
            if missing:
                existing = {
                    self.original_feature_name(agset_id, c) for c in table.columns[1:]
                }
                self.evolve_feature_table(agset_id, existing | missing)
                table = self.tables[table_name]
            frow = None
            for row in table.rows:
                if row[0] == annotation_id:
                    frow = row
                    break
            if frow is None:
                frow = [annotation_id] + [None] * (len(table.columns) - 1)
                table.rows.append(frow)
            for name, value in changes.items():
                frow[table.col(name.upper())] = str(value)
            version_row[1] = str(current + 1)
            self._persist(table)
            self._persist(self.tables["VERSIONS"])
            return current + 1

    # -- loading -----------------------------------------------------------

    def load_agset(self, agset_id: str) -> AGSet:
        """Rebuild the stored AGSet; structurally equal to what was stored."""
        with self._lock:
            agset_table = self.tables["AGSET"]
            head = next((r for r in agset_table.rows if r[0] == agset_id), None)
            if head is None:
                raise UnknownAgset(f"no such agset: {agset_id!r}")
            agset = AGSet(
                agset_id=agset_id, version=head[1] or "", xmlns=head[2] or "",
                xlink=head[3] or "",
            )
            tl_table = self.tables["TIMELINE"]
            for row in tl_table.rows:
                if row[tl_table.col("AGSETID")] == agset_id:
                    agset.add_timeline(row[tl_table.col("TIMELINEID")])
            sig_table = self.tables["SIGNAL"]
            for row in sig_table.rows:
                if row[sig_table.col("AGSETID")] != agset_id:
                    continue
                tl = agset.timelines[row[sig_table.col("TIMELINEID")]]
                tl.add_signal(
                    row[sig_table.col("SIGNALID")],
                    mimeclass=row[sig_table.col("MIMECLASS")] or "",
                    mimetype=row[sig_table.col("MIMETYPE")] or "",
                    encoding=row[sig_table.col("ENCODING")] or "",
                    unit=row[sig_table.col("UNIT")] or "",
                    xlinktype=row[sig_table.col("XLINKTYPE")] or "",
                    xlinkhref=row[sig_table.col("XLINKHREF")] or "",
                    track=row[sig_table.col("TRACK")] or "",
                )
            ag_table = self.tables["AG"]
            for row in ag_table.rows:
                if row[ag_table.col("AGSETID")] == agset_id:
                    agset.add_ag(
                        row[ag_table.col("AGID")],
                        row[ag_table.col("TIMELINEID")],
                        row[ag_table.col("TYPE")],
                    )
            anchor_table = self.tables["ANCHOR"]
            for row in anchor_table.rows:
                if row[anchor_table.col("AGSETID")] != agset_id:
                    continue
                ag = agset.ags[row[anchor_table.col("AGID")]]
                signals = row[anchor_table.col("SIGNALS")] or ""
                ag.add_anchor(
                    row[anchor_table.col("ANCHORID")],
                    offset=row[anchor_table.col("OFFSET")],
                    unit=row[anchor_table.col("UNIT")] or "",
                    signal_ids=signals.split(" ") if signals else [],
                )
            corpus_table = self.tables.get(feature_table_name(agset_id))
            features_by_ann: dict[str, dict[str, str]] = {}
            if corpus_table is not None:
                col_names = [
                    self.original_feature_name(agset_id, c) for c in corpus_table.columns[1:]
                ]
                for row in corpus_table.rows:
                    features_by_ann[row[0]] = {
                        name: value
                        for name, value in zip(col_names, row[1:])
                        if value is not None
                    }
            ann_table = self.tables["ANNOTATION"]
            for row in ann_table.rows:
                if row[ann_table.col("AGSETID")] != agset_id:
                    continue
                ag = agset.ags[row[ann_table.col("AGID")]]
                ann_id = row[ann_table.col("ANNOTATIONID")]
                # Constructed directly: rows were validated at store time,
                # so the per-edge cycle check is unnecessary here.
                ag.annotations[ann_id] = _bare_annotation(
                    ann_id, ag,
                    row[ann_table.col("STARTANCHOR")],
                    row[ann_table.col("ENDANCHOR")],
                    row[ann_table.col("TYPE")] or "",
                    features_by_ann.get(ann_id, {}),
                )
            md_table = self.tables["METADATA"]
            for row in md_table.rows:
                if row[md_table.col("AGSETID")] == agset_id:
                    agset.set_metadata(
                        row[md_table.col("ID")],
                        row[md_table.col("NAME")],
                        row[md_table.col("VALUE")] or "",
                    )
            return agset

    # -- SQL emission -------------------------------------------------------

    def emit_sql(self, dialect: str = "ansi") -> str:
        """DDL for the fixed tables and corpora plus INSERTs for all rows."""
        if dialect != "ansi":
            raise ValueError(f"unsupported dialect {dialect!r}")
        with self._lock:
            blocks: list[str] = []
            for name in FIXED_TABLE_ORDER:
                blocks.append(SCHEMA_DDL[name] + "\n;")
            for corpus_table_name in sorted(self.feature_tables):
                table = self.tables[corpus_table_name]
                lines = [f"CREATE TABLE {corpus_table_name} ("]
                lines.append("  ANNOTATIONID VARCHAR(50) NOT NULL,")
                for col in table.columns[1:]:
                    pad = col.ljust(12) if len(col) < 12 else col + " "
                    lines.append(f"  {pad}TEXT,")
                lines.append("  PRIMARY KEY (ANNOTATIONID),")
                lines.append("  FOREIGN KEY (ANNOTATIONID) REFERENCES ANNOTATION)")
                blocks.append("\n".join(lines) + "\n;")
            emitted = list(FIXED_TABLE_ORDER) + sorted(self.feature_tables)
            for name in emitted:
                table = self.tables[name]
                column_list = ", ".join(table.columns)
                for row in table.rows:
                    values = ", ".join(_sql_literal(v) for v in row)
                    blocks.append(
                        f"INSERT INTO {name} ({column_list}) VALUES ({values});"
                    )
            return "\n\n".join(blocks) + "\n"


def _bare_annotation(ann_id, ag: AG, start, end, type_, features):
    from .model import Annotation

    return Annotation(ann_id, ag.ag_id, start or "", end or "", type_, dict(features))


def _sql_literal(value) -> str:
    if value is None:
        return "NULL"
    if isinstance(value, float):
        return repr(value)
    return "'" + str(value).replace("'", "''") + "'"


def emit_sql(target: "TableStore | AGSet", dialect: str = "ansi") -> str:
    """Emit SQL for a store, or for a single AGSet via a scratch store."""
    if isinstance(target, TableStore):
        return target.emit_sql(dialect)
    scratch = TableStore(None)
    scratch.store_agset(target)
    return scratch.emit_sql(dialect)
