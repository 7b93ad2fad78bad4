"""Import/export of AGSets in the two interchange formats.

* ``aif-lite`` -- a minimal XML document, one element per object.  Tag and
  attribute names are documented in docs/formats.md.  Features whose names
  are XML-attribute-safe are written as attributes on the annotation
  element; all others fall back to a ``<feature>`` child element.
* ``tsv`` -- a sectioned tab-separated stream (UTF-8).  Section markers
  start with ``#``; each section carries a header row of column names.
  Cell escaping follows tsvio.

Export takes a feature-name whitelist so management fields can be kept out
of distributed copies; everything else round-trips exactly.
"""

from __future__ import annotations

import io
import re
import xml.etree.ElementTree as ET
from typing import Iterable

from . import tsvio
from .errors import BadDocument, UnsupportedFormat
from .model import AGSet, check_feature_name

FORMATS = ("aif-lite", "tsv")

# Names usable directly as XML attributes for features. Reserved structural
# attribute names and the xml-prefixed names are excluded.
_ATTR_SAFE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")
_RESERVED_ATTRS = {"id", "start", "end", "type"}


def _attr_safe(name: str) -> bool:
    return bool(_ATTR_SAFE.match(name)) and name not in _RESERVED_ATTRS and not name.lower().startswith("xml")


def _selected(features: dict[str, str], whitelist: set[str] | None) -> list[tuple[str, str]]:
    items = features.items() if whitelist is None else (
        (k, v) for k, v in features.items() if k in whitelist
    )
    return sorted(items)


def export_filtered(
    agset: AGSet,
    field_whitelist: Iterable[str] | None = None,
    format: str = "aif-lite",
) -> bytes:
    """Serialize `agset`, keeping only whitelisted feature fields.

    `field_whitelist=None` keeps every field.
    """
    whitelist = None if field_whitelist is None else set(field_whitelist)
    if format == "aif-lite":
        return _export_aif(agset, whitelist)
    if format == "tsv":
        return _export_tsv(agset, whitelist)
    raise UnsupportedFormat(f"unsupported format {format!r}")


def import_agset(data: bytes, format: str | None = None) -> AGSet:
    """Parse bytes produced by export_filtered; `format=None` auto-detects."""
    if format is None:
        format = detect_format(data)
    if format == "aif-lite":
        return _import_aif(data)
    if format == "tsv":
        return _import_tsv(data)
    raise UnsupportedFormat(f"unsupported format {format!r}")


def detect_format(data: bytes) -> str:
    head = data.lstrip()[:1]
    return "aif-lite" if head == b"<" else "tsv"


# -- AIF-lite ----------------------------------------------------------------

def _export_aif(agset: AGSet, whitelist: set[str] | None) -> bytes:
    root = ET.Element("agset", id=agset.agset_id)
    if agset.version:
        root.set("version", agset.version)
    if agset.xmlns:
        root.set("ns", agset.xmlns)
    if agset.xlink:
        root.set("xlink", agset.xlink)
    for item in agset.metadata_items():
        # Values ride in attributes: XML parsers normalize \r in text content
        # but preserve it in attribute values.
        ET.SubElement(root, "metadata", owner=item.owner_id, name=item.name, value=item.value)
    for tl in sorted(agset.timelines.values(), key=lambda t: t.timeline_id):
        tl_el = ET.SubElement(root, "timeline", id=tl.timeline_id)
        for sig in sorted(tl.signals.values(), key=lambda s: s.signal_id):
            sig_el = ET.SubElement(tl_el, "signal", id=sig.signal_id)
            for attr in ("mimeclass", "mimetype", "encoding", "unit", "xlinktype", "xlinkhref", "track"):
                value = getattr(sig, attr)
                if value:
                    sig_el.set(attr, value)
    for ag in sorted(agset.ags.values(), key=lambda a: a.ag_id):
        ag_el = ET.SubElement(root, "ag", id=ag.ag_id)
        if ag.timeline_id is not None:
            ag_el.set("timeline", ag.timeline_id)
        if ag.type is not None:
            ag_el.set("type", ag.type)
        for anchor in sorted(ag.anchors.values(), key=lambda a: a.anchor_id):
            a_el = ET.SubElement(ag_el, "anchor", id=anchor.anchor_id)
            if anchor.offset is not None:
                a_el.set("offset", repr(anchor.offset))
            if anchor.unit:
                a_el.set("unit", anchor.unit)
            if anchor.signal_ids:
                a_el.set("signals", " ".join(anchor.signal_ids))
        for ann in sorted(ag.annotations.values(), key=lambda a: a.annotation_id):
            ann_el = ET.SubElement(
                ag_el, "annotation",
                id=ann.annotation_id, start=ann.start_anchor, end=ann.end_anchor, type=ann.type,
            )
            for name, value in _selected(ann.features, whitelist):
                if _attr_safe(name):
                    ann_el.set(name, value)
                else:
                    ET.SubElement(ann_el, "feature", name=name, value=value)
    ET.indent(root)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


def _import_aif(data: bytes) -> AGSet:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise BadDocument(f"not well-formed aif-lite: {exc}") from exc
    if root.tag != "agset":
        raise BadDocument(f"expected <agset> root, got <{root.tag}>")
    agset = AGSet(
        agset_id=root.get("id", ""),
        version=root.get("version", ""),
        xmlns=root.get("ns", ""),
        xlink=root.get("xlink", ""),
    )
    for el in root:
        if el.tag == "metadata":
            agset.set_metadata(el.get("owner", ""), el.get("name", ""), el.get("value", ""))
        elif el.tag == "timeline":
            tl = agset.add_timeline(el.get("id", ""))
            for sig_el in el:
                if sig_el.tag != "signal":
                    raise BadDocument(f"unexpected <{sig_el.tag}> under <timeline>")
                tl.add_signal(
                    sig_el.get("id", ""),
                    **{
                        attr: sig_el.get(attr, "")
                        for attr in ("mimeclass", "mimetype", "encoding", "unit", "xlinktype", "xlinkhref", "track")
                    },
                )
        elif el.tag == "ag":
            ag = agset.add_ag(el.get("id", ""), el.get("timeline"), el.get("type"))
            for child in el:
                if child.tag == "anchor":
                    offset = child.get("offset")
                    signals = child.get("signals", "")
                    ag.add_anchor(
                        child.get("id", ""),
                        offset=None if offset is None else float(offset),
                        unit=child.get("unit", ""),
                        signal_ids=signals.split(" ") if signals else [],
                    )
                elif child.tag == "annotation":
                    features = {
                        k: v for k, v in child.attrib.items() if k not in _RESERVED_ATTRS
                    }
                    for f_el in child:
                        if f_el.tag != "feature":
                            raise BadDocument(f"unexpected <{f_el.tag}> under <annotation>")
                        features[f_el.get("name", "")] = f_el.get("value", "")
                    for name in features:
                        check_feature_name(name)
                    ag.add_annotation(
                        child.get("id", ""),
                        child.get("start", ""),
                        child.get("end", ""),
                        child.get("type", ""),
                        features,
                    )
                else:
                    raise BadDocument(f"unexpected <{child.tag}> under <ag>")
        else:
            raise BadDocument(f"unexpected <{el.tag}> under <agset>")
    return agset


# -- sectioned TSV -----------------------------------------------------------

_AGSET_COLS = ["agset_id", "version", "xmlns", "xlink"]
_METADATA_COLS = ["owner_id", "name", "value"]
_TIMELINE_COLS = ["timeline_id"]
_SIGNAL_COLS = ["signal_id", "timeline_id", "mimeclass", "mimetype", "encoding", "unit", "xlinktype", "xlinkhref", "track"]
_AG_COLS = ["ag_id", "timeline_id", "type"]
_ANCHOR_COLS = ["anchor_id", "ag_id", "offset", "unit", "signals"]
_ANNOTATION_COLS = ["annotation_id", "ag_id", "start_anchor", "end_anchor", "type"]


def _export_tsv(agset: AGSet, whitelist: set[str] | None) -> bytes:
    feature_cols = sorted(
        name for name in agset.feature_names() if whitelist is None or name in whitelist
    )
    out = io.StringIO()

    def section(marker: str, header: list[str], rows: list[list[str | None]]) -> None:
        out.write(marker + "\n")
        out.write(tsvio.format_row(list(header)))
        for row in rows:
            out.write(tsvio.format_row(row))

    section("#agset", _AGSET_COLS, [[agset.agset_id, agset.version, agset.xmlns, agset.xlink]])
    section(
        "#metadata", _METADATA_COLS,
        [[i.owner_id, i.name, i.value] for i in agset.metadata_items()],
    )
    section(
        "#timeline", _TIMELINE_COLS,
        [[tid] for tid in sorted(agset.timelines)],
    )
    signal_rows: list[list[str | None]] = []
    for tl in sorted(agset.timelines.values(), key=lambda t: t.timeline_id):
        for sig in sorted(tl.signals.values(), key=lambda s: s.signal_id):
            signal_rows.append([
                sig.signal_id, tl.timeline_id, sig.mimeclass, sig.mimetype,
                sig.encoding, sig.unit, sig.xlinktype, sig.xlinkhref, sig.track,
            ])
    section("#signal", _SIGNAL_COLS, signal_rows)
    section(
        "#ag", _AG_COLS,
        [[ag.ag_id, ag.timeline_id, ag.type] for ag in sorted(agset.ags.values(), key=lambda a: a.ag_id)],
    )
    anchor_rows: list[list[str | None]] = []
    annotation_rows: list[list[str | None]] = []
    for ag in sorted(agset.ags.values(), key=lambda a: a.ag_id):
        for anchor in sorted(ag.anchors.values(), key=lambda a: a.anchor_id):
            anchor_rows.append([
                anchor.anchor_id, ag.ag_id,
                None if anchor.offset is None else repr(anchor.offset),
                anchor.unit, " ".join(anchor.signal_ids),
            ])
        for ann in sorted(ag.annotations.values(), key=lambda a: a.annotation_id):
            row: list[str | None] = [
                ann.annotation_id, ag.ag_id, ann.start_anchor, ann.end_anchor, ann.type,
            ]
            selected = dict(_selected(ann.features, whitelist))
            row.extend(selected.get(col) for col in feature_cols)
            annotation_rows.append(row)
    section("#anchor", _ANCHOR_COLS, anchor_rows)
    # Feature columns are prefixed "f:" so arbitrary feature names can never
    # collide with the structural column names.
    section("#annotation", _ANNOTATION_COLS + [f"f:{c}" for c in feature_cols], annotation_rows)
    return out.getvalue().encode("utf-8")


def _import_tsv(data: bytes) -> AGSet:
    text = data.decode("utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    sections: dict[str, tuple[list[str], list[list[str | None]]]] = {}
    current: str | None = None
    header: list[str] | None = None
    for line in lines:
        if line.startswith("#"):
            current = line[1:]
            header = None
            continue
        if current is None:
            raise BadDocument("tsv content before first section marker")
        cells = tsvio.parse_row(line)
        if header is None:
            header = [c or "" for c in cells]
            sections[current] = (header, [])
        else:
            sections[current][1].append(cells)

    def rows(name: str) -> list[dict[str, str | None]]:
        if name not in sections:
            raise BadDocument(f"missing #{name} section")
        head, data_rows = sections[name]
        out = []
        for cells in data_rows:
            if len(cells) != len(head):
                raise BadDocument(f"row width mismatch in #{name}")
            out.append(dict(zip(head, cells)))
        return out

    agset_rows = rows("agset")
    if len(agset_rows) != 1:
        raise BadDocument("expected exactly one #agset row")
    head = agset_rows[0]
    agset = AGSet(
        agset_id=head["agset_id"] or "",
        version=head["version"] or "",
        xmlns=head["xmlns"] or "",
        xlink=head["xlink"] or "",
    )
    for r in rows("metadata"):
        agset.set_metadata(r["owner_id"] or "", r["name"] or "", r["value"] or "")
    for r in rows("timeline"):
        agset.add_timeline(r["timeline_id"] or "")
    for r in rows("signal"):
        tl = agset.timelines.get(r["timeline_id"] or "")
        if tl is None:
            raise BadDocument(f"signal {r['signal_id']!r} names unknown timeline")
        tl.add_signal(
            r["signal_id"] or "",
            **{k: r[k] or "" for k in ("mimeclass", "mimetype", "encoding", "unit", "xlinktype", "xlinkhref", "track")},
        )
    for r in rows("ag"):
        agset.add_ag(r["ag_id"] or "", r["timeline_id"], r["type"])
    for r in rows("anchor"):
        ag = agset.ags.get(r["ag_id"] or "")
        if ag is None:
            raise BadDocument(f"anchor {r['anchor_id']!r} names unknown ag")
        offset_cell = r["offset"]
        signals = r["signals"] or ""
        ag.add_anchor(
            r["anchor_id"] or "",
            offset=None if offset_cell is None else float(offset_cell),
            unit=r["unit"] or "",
            signal_ids=signals.split(" ") if signals else [],
        )
    ann_header = sections["annotation"][0]
    feature_cols = [c for c in ann_header if c.startswith("f:")]
    for r in rows("annotation"):
        ag = agset.ags.get(r["ag_id"] or "")
        if ag is None:
            raise BadDocument(f"annotation {r['annotation_id']!r} names unknown ag")
        features = {col[2:]: cell for col in feature_cols if (cell := r[col]) is not None}
        ag.add_annotation(
            r["annotation_id"] or "",
            r["start_anchor"] or "",
            r["end_anchor"] or "",
            r["type"] or "",
            features,
        )
    return agset
