"""Reachability indexes over typed annotation arcs.

Two representations of the same relation:

* tuple form -- the set of (StartAnchor, EndAnchor) pairs connected by a
  path of arcs of one type, stored relationally as (Start, End, Type);
* matrix form -- per graph, an n x n boolean matrix over the graph's full
  anchor count, indexed through a deterministic anchor numbering.

The relation is reflexively and transitively closed, with reflexive pairs
limited to anchors incident to at least one arc of the indexed type: a
zero-length path only "exists" where the type occurs at all, which is what
makes a starred query segment able to match zero arcs without flooding the
index with every anchor in the corpus.

Domain restriction keeps only pairs contained in the span of a single
annotation of a coarser type (e.g. phn pairs inside one wrd): the tag
"phn/wrd" names that variant in the persisted Type column.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import MissingOffsets, StorageFailure
from .model import AG, AGSet
from .store import KSTAR_ARRAY_COLUMNS, KSTAR_COLUMNS, TableStore


def index_tag(type: str, domain_tag: str | None) -> str:
    return type if domain_tag is None or domain_tag == type else f"{type}/{domain_tag}"


@dataclass(frozen=True)
class AnchorNumbering:
    """Bijection anchor id <-> 1..n, sorted by (offset, id), missing offsets last."""

    order: tuple[str, ...]

    @property
    def n(self) -> int:
        return len(self.order)

    def number(self, anchor_id: str) -> int | None:
        index = self.index_map.get(anchor_id)
        return None if index is None else index

    @property
    def index_map(self) -> Mapping[str, int]:
        cached = getattr(self, "_index_map", None)
        if cached is None:
            cached = {aid: i + 1 for i, aid in enumerate(self.order)}
            object.__setattr__(self, "_index_map", cached)
        return cached


def numbering_from_pairs(pairs: Iterable[tuple[str, float | None]]) -> AnchorNumbering:
    def key(pair: tuple[str, float | None]):
        anchor_id, offset = pair
        return (0, offset, anchor_id) if offset is not None else (1, 0.0, anchor_id)

    return AnchorNumbering(tuple(aid for aid, _ in sorted(pairs, key=key)))


def anchor_num(ag: AG) -> AnchorNumbering:
    return numbering_from_pairs((a.anchor_id, a.offset) for a in ag.anchors.values())


@dataclass(frozen=True)
class KstarIndex:
    ag_id: str
    type: str
    domain_tag: str | None
    pairs: frozenset[tuple[str, str]]

    @property
    def tag(self) -> str:
        return index_tag(self.type, self.domain_tag)

    def tuples(self) -> set[tuple[str, str, str]]:
        return {(s, e, self.tag) for s, e in self.pairs}

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class KstarArrayIndex:
    ag_id: str
    type: str
    domain_tag: str | None
    matrix: np.ndarray  # n x n bool
    numbering: AnchorNumbering

    @property
    def tag(self) -> str:
        return index_tag(self.type, self.domain_tag)

    def cell(self, start_id: str, end_id: str) -> bool:
        i = self.numbering.number(start_id)
        j = self.numbering.number(end_id)
        if i is None or j is None:
            return False
        return bool(self.matrix[i - 1, j - 1])


def _closure_pairs(ag: AG, type: str) -> set[tuple[str, str]]:
    adjacency: dict[str, set[str]] = defaultdict(set)
    incident: set[str] = set()
    for ann in ag.annotations.values():
        if ann.type == type:
            adjacency[ann.start_anchor].add(ann.end_anchor)
            incident.add(ann.start_anchor)
            incident.add(ann.end_anchor)
    pairs: set[tuple[str, str]] = set()
    for source in incident:
        pairs.add((source, source))
        seen = {source}
        queue = deque([source])
        while queue:
            node = queue.popleft()
            for nxt in adjacency[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    pairs.add((source, nxt))
                    queue.append(nxt)
    return pairs


def build_kstar(ag: AG, type: str) -> KstarIndex:
    """Reflexive-transitive closure of the type-`type` arc relation."""
    return KstarIndex(ag.ag_id, type, None, frozenset(_closure_pairs(ag, type)))


def _domain_spans(ag: AG, domain_type: str) -> list[tuple[float, float]]:
    spans = []
    for ann in ag.annotations.values():
        if ann.type != domain_type:
            continue
        start = ag.anchors.get(ann.start_anchor)
        end = ag.anchors.get(ann.end_anchor)
        if start is None or end is None or start.offset is None or end.offset is None:
            raise MissingOffsets(
                f"domain annotation {ann.annotation_id!r} lacks anchor offsets"
            )
        spans.append((start.offset, end.offset))
    return spans


def build_kstar_domain(ag: AG, type: str, domain_type: str) -> KstarIndex:
    """Closure pairs kept only when a single domain-type span contains them."""
    base = _closure_pairs(ag, type)
    spans = _domain_spans(ag, domain_type)

    def offset_of(anchor_id: str) -> float:
        anchor = ag.anchors[anchor_id]
        if anchor.offset is None:
            raise MissingOffsets(f"anchor {anchor_id!r} lacks an offset")
        return anchor.offset

    kept = {
        (s, e)
        for s, e in base
        if any(lo <= offset_of(s) and offset_of(e) <= hi for lo, hi in spans)
    }
    return KstarIndex(ag.ag_id, type, domain_type, frozenset(kept))


def build_kstar_array(ag: AG, type: str, domain_tag: str | None = None) -> KstarArrayIndex:
    """Matrix form of the (optionally domain-restricted) closure."""
    if domain_tag is None or domain_tag == type:
        index = build_kstar(ag, type)
    else:
        index = build_kstar_domain(ag, type, domain_tag)
    numbering = anchor_num(ag)
    matrix = np.zeros((numbering.n, numbering.n), dtype=bool)
    for s, e in index.pairs:
        matrix[numbering.index_map[s] - 1, numbering.index_map[e] - 1] = True
    return KstarArrayIndex(ag.ag_id, type, index.domain_tag, matrix, numbering)


# -- persistence ---------------------------------------------------------------

def pack_matrix(matrix: np.ndarray) -> str:
    """Row-major bit packing, hex encoded."""
    return np.packbits(matrix.reshape(-1).astype(np.uint8)).tobytes().hex()


def unpack_matrix(hex_text: str, n: int) -> np.ndarray:
    raw = np.frombuffer(bytes.fromhex(hex_text), dtype=np.uint8)
    bits = np.unpackbits(raw)[: n * n]
    if bits.size != n * n:
        raise StorageFailure(f"packed matrix shorter than {n}x{n}")
    return bits.reshape((n, n)).astype(bool)


def store_kstar(store: TableStore, agset: AGSet, type: str, domain_tag: str | None = None) -> int:
    """Build and persist tuple-form indexes for every graph; returns tuple count."""
    tag = index_tag(type, domain_tag)
    table = store.ensure_table("KSTAR", KSTAR_COLUMNS)
    agset_anchors = {
        anchor_id for ag in agset.ags.values() for anchor_id in ag.anchors
    }
    table.rows = [
        row for row in table.rows
        if not (row[2] == tag and row[0] in agset_anchors)
    ]
    count = 0
    for ag in sorted(agset.ags.values(), key=lambda a: a.ag_id):
        if domain_tag is None or domain_tag == type:
            index = build_kstar(ag, type)
        else:
            index = build_kstar_domain(ag, type, domain_tag)
        for s, e in sorted(index.pairs):
            table.rows.append([s, e, tag])
            count += 1
    _register(store, agset.agset_id, "kstar", tag)
    store._persist(table)
    return count


def store_kstar_arrays(store: TableStore, agset: AGSet, type: str, domain_tag: str | None = None) -> int:
    """Build and persist matrix-form indexes; returns the matrix count."""
    tag = index_tag(type, domain_tag)
    table = store.ensure_table("KSTAR_ARRAY", KSTAR_ARRAY_COLUMNS)
    ag_ids = set(agset.ags)
    table.rows = [
        row for row in table.rows if not (row[1] == tag and row[0] in ag_ids)
    ]
    count = 0
    for ag in sorted(agset.ags.values(), key=lambda a: a.ag_id):
        index = build_kstar_array(ag, type, domain_tag)
        table.rows.append([ag.ag_id, tag, pack_matrix(index.matrix)])
        count += 1
    _register(store, agset.agset_id, "array", tag)
    store._persist(table)
    return count


def _register(store: TableStore, agset_id: str, kind: str, tag: str) -> None:
    registry = store.tables["INDEXES"]
    if not any(r[0] == agset_id and r[1] == kind and r[2] == tag for r in registry.rows):
        registry.rows.append([agset_id, kind, tag])
    store._persist(registry)


def has_index(store: TableStore, agset_id: str, kind: str, tag: str) -> bool:
    return any(
        r[0] == agset_id and r[1] == kind and r[2] == tag
        for r in store.tables["INDEXES"].rows
    )


def store_numberings(store: TableStore, agset_id: str) -> dict[str, AnchorNumbering]:
    """Recompute the per-graph numbering from stored anchor rows."""
    anchor_table = store.tables["ANCHOR"]
    ai = anchor_table.col("AGSETID")
    gi = anchor_table.col("AGID")
    ii = anchor_table.col("ANCHORID")
    oi = anchor_table.col("OFFSET")
    pairs: dict[str, list[tuple[str, float | None]]] = defaultdict(list)
    for row in anchor_table.rows:
        if row[ai] == agset_id:
            pairs[row[gi]].append((row[ii], row[oi]))
    return {ag_id: numbering_from_pairs(p) for ag_id, p in pairs.items()}
