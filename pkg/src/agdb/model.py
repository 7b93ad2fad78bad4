"""In-memory annotation-graph object model.

An annotation graph is a directed acyclic graph: nodes are anchors that
optionally carry a signal offset, and edges are typed annotations whose
label data is an open-ended record of string-valued features.  An AGSet
bundles a collection of graphs with the timelines and signals their
offsets refer to, plus name/value metadata attached to any of those
objects.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterator

from .errors import CycleDetected, DuplicateId, InvalidFeatureName, UnknownAnchor

# Feature records are plain dicts: open-ended string fields on an annotation.
FeatureRecord = dict[str, str]


def check_feature_name(name: str) -> None:
    """Feature names must be non-empty and free of tab/newline characters."""
    if not name or "\t" in name or "\n" in name:
        raise InvalidFeatureName(f"invalid feature name: {name!r}")


@dataclass
class Signal:
    signal_id: str
    timeline_id: str = ""
    mimeclass: str = ""
    mimetype: str = ""
    encoding: str = ""
    unit: str = ""
    xlinktype: str = ""
    xlinkhref: str = ""
    track: str = ""


@dataclass
class Timeline:
    timeline_id: str
    agset_id: str = ""
    signals: dict[str, Signal] = field(default_factory=dict)

    def add_signal(self, signal_id: str, **attrs: str) -> Signal:
        if signal_id in self.signals:
            raise DuplicateId(f"signal {signal_id!r} already exists")
        sig = Signal(signal_id=signal_id, timeline_id=self.timeline_id, **attrs)
        self.signals[signal_id] = sig
        return sig


@dataclass
class Anchor:
    anchor_id: str
    ag_id: str = ""
    offset: float | None = None
    unit: str = ""
    signal_ids: list[str] = field(default_factory=list)


@dataclass
class Annotation:
    annotation_id: str
    ag_id: str = ""
    start_anchor: str = ""
    end_anchor: str = ""
    type: str = ""
    features: FeatureRecord = field(default_factory=dict)

    def set_feature(self, name: str, value: str) -> None:
        """Upsert one feature; overwriting an existing value is allowed."""
        check_feature_name(name)
        self.features[name] = str(value)

    def get_feature(self, name: str) -> str | None:
        return self.features.get(name)


@dataclass
class AG:
    ag_id: str
    agset_id: str = ""
    timeline_id: str | None = None
    type: str | None = None
    anchors: dict[str, Anchor] = field(default_factory=dict)
    annotations: dict[str, Annotation] = field(default_factory=dict)
    # Owning AGSet, when attached; annotation ids are unique per AGSet.
    _agset: "AGSet | None" = field(default=None, repr=False, compare=False)

    def add_anchor(
        self,
        anchor_id: str,
        offset: float | None = None,
        unit: str = "",
        signal_ids: tuple[str, ...] | list[str] = (),
    ) -> Anchor:
        if anchor_id in self.anchors:
            raise DuplicateId(f"anchor {anchor_id!r} already exists in {self.ag_id!r}")
        anchor = Anchor(anchor_id, self.ag_id, offset, unit, list(signal_ids))
        self.anchors[anchor_id] = anchor
        return anchor

    def add_annotation(
        self,
        annotation_id: str,
        start: str,
        end: str,
        type: str,
        features: FeatureRecord | None = None,
    ) -> Annotation:
        """Append an edge from anchor `start` to anchor `end`.

        The graph must stay acyclic: if the new edge would close a cycle
        the graph is left untouched and CycleDetected is raised.
        """
        if start not in self.anchors:
            raise UnknownAnchor(f"unknown start anchor {start!r} in {self.ag_id!r}")
        if end not in self.anchors:
            raise UnknownAnchor(f"unknown end anchor {end!r} in {self.ag_id!r}")
        if self._annotation_id_in_use(annotation_id):
            raise DuplicateId(f"annotation id {annotation_id!r} already in use")
        for name in (features or {}):
            check_feature_name(name)
        # A path end ~> start (including end == start) means the new edge
        # closes a cycle.
        if self._reaches(end, start):
            raise CycleDetected(
                f"edge {start!r}->{end!r} would create a cycle in {self.ag_id!r}"
            )
        ann = Annotation(annotation_id, self.ag_id, start, end, type, dict(features or {}))
        self.annotations[annotation_id] = ann
        return ann

    def _annotation_id_in_use(self, annotation_id: str) -> bool:
        if self._agset is not None:
            return any(annotation_id in ag.annotations for ag in self._agset.ags.values())
        return annotation_id in self.annotations

    def _reaches(self, src: str, dst: str) -> bool:
        adjacency: dict[str, list[str]] = defaultdict(list)
        for ann in self.annotations.values():
            adjacency[ann.start_anchor].append(ann.end_anchor)
        seen = {src}
        queue = deque([src])
        while queue:
            node = queue.popleft()
            if node == dst:
                return True
            for nxt in adjacency[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        return False


@dataclass
class MetadataItem:
    owner_id: str
    name: str
    value: str


@dataclass
class AGSet:
    agset_id: str
    version: str = ""
    xmlns: str = ""
    xlink: str = ""
    timelines: dict[str, Timeline] = field(default_factory=dict)
    ags: dict[str, AG] = field(default_factory=dict)
    metadata: dict[tuple[str, str], str] = field(default_factory=dict)

    def add_timeline(self, timeline_id: str) -> Timeline:
        if timeline_id in self.timelines:
            raise DuplicateId(f"timeline {timeline_id!r} already exists")
        tl = Timeline(timeline_id, self.agset_id)
        self.timelines[timeline_id] = tl
        return tl

    def add_ag(self, ag_id: str, timeline_id: str | None = None, type: str | None = None) -> AG:
        if ag_id in self.ags:
            raise DuplicateId(f"ag {ag_id!r} already exists")
        ag = AG(ag_id, self.agset_id, timeline_id, type)
        ag._agset = self
        self.ags[ag_id] = ag
        return ag

    def set_metadata(self, owner_id: str, name: str, value: str) -> None:
        self.metadata[(owner_id, name)] = str(value)

    def metadata_items(self) -> list[MetadataItem]:
        return [MetadataItem(o, n, v) for (o, n), v in sorted(self.metadata.items())]

    def all_annotations(self) -> Iterator[Annotation]:
        for ag in self.ags.values():
            yield from ag.annotations.values()

    def find_annotation(self, annotation_id: str) -> Annotation | None:
        for ag in self.ags.values():
            ann = ag.annotations.get(annotation_id)
            if ann is not None:
                return ann
        return None

    def feature_names(self) -> set[str]:
        names: set[str] = set()
        for ann in self.all_annotations():
            names.update(ann.features)
        return names

    def annotation_types(self) -> set[str]:
        return {ann.type for ann in self.all_annotations()}


@dataclass(frozen=True)
class Violation:
    """One invariant breach, naming the offending object and the rule."""

    object_id: str
    rule: str
    detail: str

    def __str__(self) -> str:
        return f"{self.rule}: {self.object_id}: {self.detail}"


def _kahn_has_cycle(ag: AG) -> bool:
    indegree = {aid: 0 for aid in ag.anchors}
    adjacency: dict[str, list[str]] = defaultdict(list)
    for ann in ag.annotations.values():
        if ann.start_anchor in indegree and ann.end_anchor in indegree:
            adjacency[ann.start_anchor].append(ann.end_anchor)
            indegree[ann.end_anchor] += 1
    queue = [aid for aid, deg in indegree.items() if deg == 0]
    visited = 0
    while queue:
        node = queue.pop()
        visited += 1
        for nxt in adjacency[node]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                queue.append(nxt)
    return visited != len(indegree)


def validate(agset: AGSet) -> list[Violation]:
    """Check every model invariant; violations are data, not exceptions."""
    out: list[Violation] = []
    if not agset.agset_id:
        out.append(Violation("<agset>", "agset-id-empty", "agset_id must be non-empty"))

    signal_owners: dict[str, list[str]] = defaultdict(list)
    for tl in agset.timelines.values():
        for sid in tl.signals:
            signal_owners[sid].append(tl.timeline_id)
    for sid, owners in signal_owners.items():
        if len(owners) > 1:
            out.append(
                Violation(sid, "duplicate-signal-id", f"signal appears in timelines {owners}")
            )

    ann_counter: Counter[str] = Counter()
    for ag in agset.ags.values():
        if ag.timeline_id is not None and ag.timeline_id not in agset.timelines:
            out.append(
                Violation(ag.ag_id, "unknown-timeline-ref", f"timeline {ag.timeline_id!r} not in agset")
            )
        if _kahn_has_cycle(ag):
            out.append(Violation(ag.ag_id, "cycle", "annotation graph is not acyclic"))
        for anchor in ag.anchors.values():
            if anchor.offset is not None and not math.isfinite(anchor.offset):
                out.append(
                    Violation(anchor.anchor_id, "nonfinite-offset", f"offset {anchor.offset!r}")
                )
        for ann in ag.annotations.values():
            ann_counter[ann.annotation_id] += 1
            for side, anchor_id in (("start", ann.start_anchor), ("end", ann.end_anchor)):
                if anchor_id not in ag.anchors:
                    out.append(
                        Violation(
                            ann.annotation_id,
                            "unknown-anchor",
                            f"{side} anchor {anchor_id!r} not in {ag.ag_id!r}",
                        )
                    )
            start = ag.anchors.get(ann.start_anchor)
            end = ag.anchors.get(ann.end_anchor)
            if (
                start is not None
                and end is not None
                and start.offset is not None
                and end.offset is not None
                and start.offset > end.offset
            ):
                out.append(
                    Violation(
                        ann.annotation_id,
                        "offset-order",
                        f"start offset {start.offset} > end offset {end.offset}",
                    )
                )
            for name in ann.features:
                if not name or "\t" in name or "\n" in name:
                    out.append(
                        Violation(ann.annotation_id, "bad-feature-name", repr(name))
                    )
    for ann_id, count in ann_counter.items():
        if count > 1:
            out.append(
                Violation(ann_id, "duplicate-annotation-id", f"used {count} times in agset")
            )
    return out
