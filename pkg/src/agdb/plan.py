"""Compilation of parsed queries into relational join plans.

A clause's path is decomposed into anchor positions and arcs.  Every
non-starred arc becomes a subquery over the annotation table (joined with
the corpus feature table when it carries label/feature constraints).  A
starred arc becomes either a closure-table reference (tuple mode) or a
matrix-cell predicate against one per-clause array source (matrix mode).
Positions shared by several subqueries induce anchor-equality predicates;
variables shared across clauses join the clauses.

Plans print as ANSI SQL (`print_sql`) in the same shape they execute.
"""

from __future__ import annotations

from dataclasses import dataclass

from .agql import Arc, Clause, FeatureEq, IdBind, LabelEq, QueryAst, Variable
from .closure import has_index, index_tag
from .errors import EngineError, MissingIndex, UnknownCorpus, UnknownFeature
from .store import TableStore, feature_table_name

ROLE_WORD_ARC = "word-arc"
ROLE_CONSTRAINED_ARC = "constrained-arc"
ROLE_KSTAR_REF = "kstar-ref"
ROLE_ARRAY_REF = "kstar-array-ref"
ROLE_ANCHOR_SCAN = "anchor-scan"

_CANONICAL_COLUMNS = {
    ROLE_WORD_ARC: ("AnnotationId", "StartAnchor", "EndAnchor", "AGId"),
    ROLE_CONSTRAINED_ARC: ("AnnotationId", "StartAnchor", "EndAnchor", "AGId"),
    ROLE_KSTAR_REF: ("StartAnchor", "EndAnchor"),
    ROLE_ARRAY_REF: ("AGId", "A"),
    ROLE_ANCHOR_SCAN: ("AnchorId", "AGId"),
}


@dataclass(frozen=True)
class Slot:
    alias: str
    column: str

    def __str__(self) -> str:
        return f"{self.alias}.{self.column}"


@dataclass(frozen=True)
class SourceSpec:
    alias: str
    role: str
    clause_index: int
    corpus: str
    arc_type: str | None = None
    index_tag: str | None = None
    filters: tuple[tuple[str, str], ...] = ()
    columns: tuple[str, ...] = ()


@dataclass(frozen=True)
class EqPredicate:
    left: Slot
    right: Slot

    def __str__(self) -> str:
        return f"{self.left}={self.right}"


@dataclass(frozen=True)
class CellPredicate:
    array_alias: str
    row: Slot
    col: Slot

    def __str__(self) -> str:
        return f"{self.array_alias}.A[anchor_num({self.row})][anchor_num({self.col})]"


Predicate = EqPredicate | CellPredicate


@dataclass(frozen=True)
class Plan:
    mode: str  # "kstar" | "kstar-array"
    domain_tag: str | None
    sources: tuple[SourceSpec, ...]
    predicates: tuple[Predicate, ...]
    projection: tuple[tuple[str, Slot], ...]  # (variable, slot)
    distinct: bool = True

    def source(self, alias: str) -> SourceSpec:
        for s in self.sources:
            if s.alias == alias:
                return s
        raise KeyError(alias)

    def closure_references(self) -> list[SourceSpec]:
        return [s for s in self.sources if s.role in (ROLE_KSTAR_REF, ROLE_ARRAY_REF)]


class _Position:
    __slots__ = ("key", "serial", "slots")

    def __init__(self, key, serial: int):
        self.key = key
        self.serial = serial
        self.slots: list[tuple[int, str]] = []  # (source index, column)


class _Source:
    def __init__(self, role: str, clause_index: int, corpus: str, path_order: int,
                 arc_type: str | None = None, tag: str | None = None,
                 filters: tuple[tuple[str, str], ...] = ()):
        self.role = role
        self.clause_index = clause_index
        self.corpus = corpus
        self.path_order = path_order
        self.arc_type = arc_type
        self.tag = tag
        self.filters = filters
        self.index = -1  # plan position, assigned after ordering
        self.alias = ""
        self.used_columns: set[str] = set()


def _resolve_corpus(store: TableStore, database: str) -> str:
    ids = store.agset_ids()
    for agset_id in ids:
        if agset_id == database:
            return agset_id
    matches = [i for i in ids if i.lower() == database.lower()]
    if len(matches) == 1:
        return matches[0]
    if len(ids) == 1:
        # The paper-style queries address "the" database; a single-corpus
        # store resolves any database name to that corpus.
        return ids[0]
    raise UnknownCorpus(f"database {database!r} matches no stored corpus")


def _walk_clause(clause: Clause, clause_index: int, positions: dict, order: list):
    """Return [(arc, left_key, right_key)] and intern position keys."""

    def intern(key):
        if key not in positions:
            positions[key] = _Position(key, len(positions))
            order.append(key)
        return key

    serial = 0
    path = clause.path
    assert isinstance(path[0], Variable)
    keys = [intern(("var", path[0].name))]
    arcs: list[tuple[Arc, object, object]] = []
    i = 1
    while i < len(path):
        arc = path[i]
        assert isinstance(arc, Arc)
        nxt = path[i + 1] if i + 1 < len(path) else None
        if isinstance(nxt, Variable):
            right = intern(("var", nxt.name))
            i += 2
        else:
            serial += 1
            right = intern(("pos", clause_index, serial))
            i += 1
        arcs.append((arc, keys[-1], right))
        keys.append(right)
    return arcs


def compile(
    ast: QueryAst,
    store: TableStore,
    mode: str = "kstar",
    domain_tag: str | None = None,
) -> Plan:
    """Build a plan for `ast` against the indexes already present in `store`."""
    if mode not in ("kstar", "kstar-array"):
        raise ValueError(f"unknown mode {mode!r}")
    positions: dict[object, _Position] = {}
    position_order: list[object] = []
    sources: list[_Source] = []
    clause_sources: list[list[_Source]] = []
    clause_arrays: list[_Source | None] = []
    cells: list[tuple[int, _Source, object, object]] = []  # (clause, array, left, right)
    idbinds: list[tuple[str, _Source]] = []

    for ci, clause in enumerate(ast.clauses):
        corpus = _resolve_corpus(store, clause.database)
        arcs = _walk_clause(clause, ci, positions, position_order)
        this_clause: list[_Source] = []
        array_source: _Source | None = None
        for order, (arc, left, right) in enumerate(arcs):
            if arc.starred:
                tag = index_tag(clause.arc_type, domain_tag)
                if mode == "kstar":
                    if not has_index(store, corpus, "kstar", tag):
                        raise MissingIndex(f"no tuple index for {tag!r} over {corpus!r}")
                    src = _Source(ROLE_KSTAR_REF, ci, corpus, order, clause.arc_type, tag)
                    this_clause.append(src)
                    positions[left].slots.append((id(src), "StartAnchor"))
                    positions[right].slots.append((id(src), "EndAnchor"))
                else:
                    if not has_index(store, corpus, "array", tag):
                        raise MissingIndex(f"no array index for {tag!r} over {corpus!r}")
                    if array_source is None:
                        array_source = _Source(ROLE_ARRAY_REF, ci, corpus, order, clause.arc_type, tag)
                    cells.append((ci, array_source, left, right))
                continue
            filters = []
            for constraint in arc.constraints:
                if isinstance(constraint, LabelEq):
                    filters.append(("label", constraint.value))
                elif isinstance(constraint, FeatureEq):
                    filters.append((constraint.field, constraint.value))
            role = ROLE_CONSTRAINED_ARC if filters else ROLE_WORD_ARC
            src = _Source(role, ci, corpus, order, clause.arc_type, None, tuple(filters))
            this_clause.append(src)
            for constraint in arc.constraints:
                if isinstance(constraint, IdBind):
                    idbinds.append((constraint.var, src))
            positions[left].slots.append((id(src), "StartAnchor"))
            positions[right].slots.append((id(src), "EndAnchor"))
            known = {c.upper() for c in store.feature_columns(corpus)[1:]}
            for fname, _ in filters:
                if fname.upper() not in known:
                    raise UnknownFeature(
                        f"feature {fname!r} is not a column of {feature_table_name(corpus)}"
                    )
        clause_sources.append(this_clause)
        clause_arrays.append(array_source)

    # Matrix mode: a cell test needs concrete anchor values on both sides; a
    # position no subquery provides gets a scan over the anchor table.
    anchor_scans: dict[object, _Source] = {}
    if mode == "kstar-array":
        for ci, array_source, left, right in cells:
            for key in (left, right):
                if not positions[key].slots and key not in anchor_scans:
                    scan = _Source(ROLE_ANCHOR_SCAN, ci, array_source.corpus, 1_000_000)
                    anchor_scans[key] = scan
                    clause_sources[ci].append(scan)
                    positions[key].slots.append((id(scan), "AnchorId"))

    # Plan order per clause: constrained arcs, then plain arcs, then anchor
    # scans, then closure references / the array source.
    role_rank = {
        ROLE_CONSTRAINED_ARC: 0, ROLE_WORD_ARC: 1, ROLE_ANCHOR_SCAN: 2,
        ROLE_KSTAR_REF: 3, ROLE_ARRAY_REF: 4,
    }
    ordered: list[_Source] = []
    for ci in range(len(ast.clauses)):
        group = list(clause_sources[ci])
        if clause_arrays[ci] is not None:
            group.append(clause_arrays[ci])
        group.sort(key=lambda s: (role_rank[s.role], s.path_order))
        ordered.extend(group)
    counters = {"W": 0, "P": 0, "K": 0, "A": 0}
    by_id: dict[int, _Source] = {}
    for index, src in enumerate(ordered):
        src.index = index
        by_id[id(src)] = src
        prefix = {
            ROLE_WORD_ARC: "W", ROLE_CONSTRAINED_ARC: "P",
            ROLE_KSTAR_REF: "K", ROLE_ARRAY_REF: "K", ROLE_ANCHOR_SCAN: "A",
        }[src.role]
        counters[prefix] += 1
        n = counters[prefix]
        if prefix in ("W", "K") and n == 1 and src.role in (ROLE_WORD_ARC, ROLE_ARRAY_REF):
            src.alias = prefix
        else:
            src.alias = f"{prefix}{n}"

    def slot(source_id: int, column: str) -> Slot:
        src = by_id[source_id]
        src.used_columns.add(column)
        return Slot(src.alias, column)

    # Anchor-equality chains, ordered by the join step that completes them.
    eq_pairs: list[tuple[tuple[int, int], EqPredicate]] = []
    for key in position_order:
        pos = positions[key]
        for a, b in zip(pos.slots, pos.slots[1:]):
            pred = EqPredicate(slot(*a), slot(*b))
            rank = (max(by_id[a[0]].index, by_id[b[0]].index), pos.serial)
            eq_pairs.append((rank, pred))
    eq_pairs.sort(key=lambda item: item[0])
    predicates: list[Predicate] = [pred for _, pred in eq_pairs]

    # The same id variable bound by several arcs forces those arcs to match
    # one and the same annotation.
    id_sources: dict[str, list[_Source]] = {}
    for var, src in idbinds:
        group = id_sources.setdefault(var, [])
        if src not in group:
            group.append(src)
    for var, group in id_sources.items():
        group.sort(key=lambda s: s.index)
        for a, b in zip(group, group[1:]):
            predicates.append(
                EqPredicate(slot(id(a), "AnnotationId"), slot(id(b), "AnnotationId"))
            )

    # Matrix mode: graph-identity equalities. Sources linked by anchor
    # equality already agree on the graph; every remaining component that
    # feeds a cell test (and the array itself) is pinned explicitly.
    if mode == "kstar-array":
        parent: dict[int, int] = {}

        def find(x: int) -> int:
            parent.setdefault(x, x)
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(x: int, y: int) -> None:
            parent[find(x)] = find(y)

        alias_index = {src.alias: src.index for src in ordered}
        for pred in predicates:
            union(alias_index[pred.left.alias], alias_index[pred.right.alias])
        for ci in range(len(ast.clauses)):
            array_source = clause_arrays[ci]
            if array_source is None:
                continue
            # Everything whose anchors feed this clause's cell tests must
            # live in the array row's graph, including sources from other
            # clauses that provide values through shared variables.
            members = [array_source] + [by_id[id(s)] for s in clause_sources[ci]]
            for cell_ci, cell_array, left, right in cells:
                if cell_array is not array_source:
                    continue
                for key in (left, right):
                    provider = by_id[positions[key].slots[0][0]]
                    if provider not in members:
                        members.append(provider)
            components: list[int] = []
            for member in members:
                root = find(member.index)
                if root not in components:
                    components.append(root)
            rep_of = {}
            for member in sorted(ordered, key=lambda s: s.index):
                rep_of.setdefault(find(member.index), member)
            base = min(components, key=lambda c: rep_of[c].index)
            base_rep = rep_of[base]
            # Array source first, then the remaining components.
            others = [array_source] + [
                rep_of[c] for c in sorted(components, key=lambda c: rep_of[c].index)
                if rep_of[c] is not base_rep and rep_of[c] is not array_source
            ]
            if find(array_source.index) == base:
                others = others[1:]
            for member in others:
                pred = EqPredicate(
                    slot(id(member), "AGId"), slot(id(base_rep), "AGId")
                )
                predicates.append(pred)
                union(member.index, base_rep.index)

        for ci, array_source, left, right in cells:
            row_sid, row_col = positions[left].slots[0]
            col_sid, col_col = positions[right].slots[0]
            array_source.used_columns.update(("AGId", "A"))
            predicates.append(
                CellPredicate(array_source.alias, slot(row_sid, row_col), slot(col_sid, col_col))
            )

    # Projection: anchor variables bind their position's first slot, id
    # variables the annotation id column of the binding arc's subquery.
    projection: list[tuple[str, Slot]] = []
    bound_positions = {key[1]: key for key in positions if key[0] == "var"}
    for var in ast.select_vars:
        if var in id_sources:
            projection.append((var, slot(id(id_sources[var][0]), "AnnotationId")))
        elif var in bound_positions:
            pos = positions[bound_positions[var]]
            if not pos.slots:
                raise EngineError(f"variable {var} is not anchored by any source")
            projection.append((var, slot(*pos.slots[0])))
        else:
            raise EngineError(f"select variable {var} is unbound")

    specs = tuple(
        SourceSpec(
            alias=s.alias, role=s.role, clause_index=s.clause_index, corpus=s.corpus,
            arc_type=s.arc_type, index_tag=s.tag, filters=s.filters,
            columns=tuple(
                c for c in _CANONICAL_COLUMNS[s.role]
                if c in s.used_columns or (s.role == ROLE_ARRAY_REF and c == "A")
            ),
        )
        for s in ordered
    )
    return Plan(
        mode=mode,
        domain_tag=domain_tag,
        sources=specs,
        predicates=tuple(predicates),
        projection=tuple(projection),
    )


# -- SQL rendering --------------------------------------------------------------

def _sql_field(field_name: str) -> str:
    return field_name[:1].upper() + field_name[1:]


def _sql_quote(value: str) -> str:
    return "'" + value.replace("'", "''") + "'"


def _subquery_lines(source: SourceSpec) -> list[str]:
    cols = ", ".join(source.columns)
    if source.role in (ROLE_WORD_ARC, ROLE_CONSTRAINED_ARC):
        if source.role == ROLE_WORD_ARC:
            return [
                f"SELECT {cols}",
                "FROM   Annotation",
                f"WHERE  Type={_sql_quote(source.arc_type or '')}",
            ]
        feature_table = feature_table_name(source.corpus)
        lines = [
            f"SELECT {cols}",
            f"FROM   Annotation A, {feature_table} F",
            f"WHERE  A.Type={_sql_quote(source.arc_type or '')} AND",
            "       A.AnnotationId=F.annotationId",
        ]
        for fname, fvalue in source.filters:
            lines[-1] += " AND"
            lines.append(f"       F.{_sql_field(fname)}={_sql_quote(fvalue)}")
        return lines
    if source.role == ROLE_KSTAR_REF:
        return [
            f"SELECT {cols}",
            "FROM   Kstar",
            f"WHERE  Type={_sql_quote(source.index_tag or '')}",
        ]
    if source.role == ROLE_ARRAY_REF:
        return [
            f"SELECT {cols}",
            "FROM   Kstar_array",
            f"WHERE  Type={_sql_quote(source.index_tag or '')}",
        ]
    return [f"SELECT {cols}", "FROM   Anchor"]


def print_sql(plan: Plan) -> str:
    """Render the plan as an ANSI SQL query text."""
    proj = ", ".join(
        f"{slot.alias}.annotationid" if slot.column == "AnnotationId" else str(slot)
        for _, slot in plan.projection
    )
    out: list[str] = [f"SELECT {proj}", ""]
    for i, source in enumerate(plan.sources):
        lines = _subquery_lines(source)
        head = "FROM  (" if i == 0 else "      ("
        body = [head + lines[0]]
        body.extend("       " + line for line in lines[1:])
        trailer = f") AS {source.alias}"
        body[-1] += trailer + ("," if i + 1 < len(plan.sources) else "")
        out.extend(body)
        out.append("")
    if plan.predicates:
        for i, pred in enumerate(plan.predicates):
            lead = "WHERE  " if i == 0 else "       "
            tail = " AND" if i + 1 < len(plan.predicates) else ""
            out.append(lead + str(pred) + tail)
    else:
        out.pop()  # no blank line before the terminator
    out.append(";")
    return "\n".join(out) + "\n"
