import copy

import pytest
from hypothesis import given, settings, strategies as st

from agdb.errors import UnsupportedFormat
from agdb.formats import detect_format, export_filtered, import_agset
from agdb.model import AGSet

# Characters legal in XML 1.0 text; tabs and newlines stay exercised.
_XML_TEXT = st.text(
    alphabet=st.characters(
        blacklist_categories=("Cs", "Cc"),
        whitelist_characters="\t\n\r",
        blacklist_characters="￾￿",
    ),
    max_size=12,
)
_FEATURE_NAME = st.text(
    alphabet=st.characters(
        blacklist_categories=("Cs", "Cc"),
        blacklist_characters="\t\n￾￿",
    ),
    min_size=1,
    max_size=8,
)


@st.composite
def agsets(draw) -> AGSet:
    agset = AGSet(
        "set0",
        version=draw(st.sampled_from(["", "1.0", "2"])),
        xmlns=draw(st.sampled_from(["", "ns-a"])),
        xlink=draw(st.sampled_from(["", "xl-b"])),
    )
    for t in range(draw(st.integers(0, 2))):
        tl = agset.add_timeline(f"tl{t}")
        for s in range(draw(st.integers(0, 2))):
            tl.add_signal(
                f"tl{t}s{s}",
                mimeclass=draw(st.sampled_from(["", "audio"])),
                mimetype="audio/wav",
                unit=draw(st.sampled_from(["", "s"])),
                track=str(s),
            )
    signal_ids = [s for tl in agset.timelines.values() for s in tl.signals]
    for name, value in draw(
        st.dictionaries(st.sampled_from(["creator", "date", "note"]), _XML_TEXT, max_size=2)
    ).items():
        agset.set_metadata("set0", name, value)
    n_ags = draw(st.integers(0, 3))
    for g in range(n_ags):
        timeline = draw(st.sampled_from([None] + sorted(agset.timelines)))
        ag = agset.add_ag(f"g{g}", timeline, draw(st.sampled_from([None, "", "speech"])))
        n_anchors = draw(st.integers(2, 6))
        offset = 0.0
        for i in range(n_anchors):
            # cumulative offsets keep index order and offset order aligned,
            # so forward arcs satisfy the monotonicity invariant
            offset += draw(st.floats(0, 1e3, allow_nan=False))
            ag.add_anchor(
                f"g{g}a{i}",
                offset=offset if draw(st.booleans()) else None,
                unit=draw(st.sampled_from(["", "s"])),
                signal_ids=draw(st.lists(st.sampled_from(signal_ids), max_size=2, unique=True))
                if signal_ids else [],
            )
        n_arcs = draw(st.integers(0, 6))
        for k in range(n_arcs):
            i = draw(st.integers(0, n_anchors - 2))
            j = draw(st.integers(i + 1, n_anchors - 1))
            features = draw(st.dictionaries(_FEATURE_NAME, _XML_TEXT, max_size=3))
            ag.add_annotation(
                f"g{g}n{k}", f"g{g}a{i}", f"g{g}a{j}",
                draw(st.sampled_from(["wrd", "phn", "txt"])), features,
            )
    return agset


@settings(max_examples=60, deadline=None)
@given(agset=agsets(), fmt=st.sampled_from(["aif-lite", "tsv"]))
def test_round_trip_all_fields(agset, fmt):
    payload = export_filtered(agset, None, fmt)
    assert import_agset(payload, fmt) == agset
    # auto-detection picks the right reader
    assert import_agset(payload) == agset
    assert detect_format(payload) == fmt


@settings(max_examples=30, deadline=None)
@given(agset=agsets(), fmt=st.sampled_from(["aif-lite", "tsv"]))
def test_filtered_import_equals_filtered_model(agset, fmt):
    names = sorted(agset.feature_names())
    whitelist = set(names[::2])
    payload = export_filtered(agset, whitelist, fmt)
    expected = copy.deepcopy(agset)
    for ag in expected.ags.values():
        for ann in ag.annotations.values():
            ann.features = {k: v for k, v in ann.features.items() if k in whitelist}
    assert import_agset(payload, fmt) == expected


@pytest.mark.parametrize("fmt", ["aif-lite", "tsv"])
def test_whitelist_excludes_field_names(chain_agset, fmt):
    for ann in chain_agset.ags["ag1"].annotations.values():
        ann.set_feature("QCMARK", "3")
    payload = export_filtered(chain_agset, {"label"}, fmt)
    text = payload.decode("utf-8")
    assert "label" in text
    assert "QCMARK" not in text


@pytest.mark.parametrize("fmt", ["aif-lite", "tsv"])
def test_empty_agset_documents(fmt):
    payload = export_filtered(AGSet("empty"), {"whatever"}, fmt)
    restored = import_agset(payload, fmt)
    assert restored == AGSet("empty")


def test_unsupported_format(chain_agset):
    with pytest.raises(UnsupportedFormat):
        export_filtered(chain_agset, None, "yaml")
    with pytest.raises(UnsupportedFormat):
        import_agset(b"x", "yaml")


def test_tsv_escapes_awkward_values(chain_agset):
    ann = chain_agset.ags["ag1"].annotations["p1"]
    ann.set_feature("note", "line1\nline2\tcol\\end")
    ann.set_feature("empty", "")
    payload = export_filtered(chain_agset, None, "tsv")
    restored = import_agset(payload, "tsv")
    got = restored.ags["ag1"].annotations["p1"].features
    assert got["note"] == "line1\nline2\tcol\\end"
    assert got["empty"] == ""


def test_absent_feature_differs_from_empty(chain_agset):
    chain_agset.ags["ag1"].annotations["p1"].set_feature("only", "")
    payload = export_filtered(chain_agset, None, "tsv")
    restored = import_agset(payload, "tsv")
    assert restored.ags["ag1"].annotations["p1"].features["only"] == ""
    assert "only" not in restored.ags["ag1"].annotations["p2"].features


def test_feature_names_unsafe_for_xml_attributes(chain_agset):
    ann = chain_agset.ags["ag1"].annotations["p1"]
    ann.set_feature("my field", "v1")      # space: not attribute-safe
    ann.set_feature("type", "shadow")      # collides with a structural attr
    ann.set_feature("xml:weird", "v2")     # reserved prefix
    payload = export_filtered(chain_agset, None, "aif-lite")
    restored = import_agset(payload, "aif-lite")
    got = restored.ags["ag1"].annotations["p1"].features
    assert got["my field"] == "v1"
    assert got["type"] == "shadow"
    assert got["xml:weird"] == "v2"
    assert restored == chain_agset
