import random
import threading

import pytest

from agdb.errors import (
    PolicyViolation,
    StorageFailure,
    UnknownAgset,
    UnknownAnnotation,
    VersionConflict,
)
from agdb.model import AGSet
from agdb.store import FIXED_TABLE_ORDER, TableStore, emit_sql, feature_table_name

from conftest import build_chain_agset, golden
from gen import random_agset
from sqlnorm import normalize_ddl


def _rows_for(store, table, agset_id):
    t = store.tables[table]
    idx = t.col("AGSETID")
    return [r for r in t.rows if r[idx] == agset_id]


def test_store_chain_fixture_row_counts(chain_agset):
    store = TableStore(None)
    store.store_agset(chain_agset)
    assert len(_rows_for(store, "ANNOTATION", "TESTCORP")) == 4
    assert len(_rows_for(store, "ANCHOR", "TESTCORP")) == 4
    assert store.tables["TESTCORP"].columns == ["ANNOTATIONID", "LABEL"]


def test_store_empty_agset():
    store = TableStore(None)
    store.store_agset(AGSet("s"))
    assert len(_rows_for(store, "AGSET", "s")) == 1
    for table in FIXED_TABLE_ORDER[1:]:
        assert _rows_for(store, table, "s") == []


def test_feature_table_columns_for_abc_corpus():
    agset = AGSet("ABC")
    ag = agset.add_ag("g")
    ag.add_anchor("x1", 0.0)
    ag.add_anchor("x2", 1.0)
    ag.add_annotation("n1", "x1", "x2", "obs", {"GENDER": "f", "AGE": "31", "POB": "pa"})
    store = TableStore(None)
    store.store_agset(agset)
    assert store.tables["ABC"].columns == ["ANNOTATIONID", "AGE", "GENDER", "POB"]


def test_load_round_trips_chain(chain_agset, tmp_path):
    store = TableStore(tmp_path / "db")
    store.store_agset(chain_agset)
    assert store.load_agset("TESTCORP") == chain_agset
    # a second instance over the same directory sees identical content
    reopened = TableStore(tmp_path / "db")
    assert reopened.load_agset("TESTCORP") == chain_agset


def test_load_unknown_agset():
    with pytest.raises(UnknownAgset):
        TableStore(None).load_agset("nope")


def test_metadata_round_trip(chain_agset):
    chain_agset.set_metadata("TESTCORP", "creator", "x")
    chain_agset.set_metadata("ag1", "pass", "2")
    store = TableStore(None)
    store.store_agset(chain_agset)
    loaded = store.load_agset("TESTCORP")
    assert loaded.metadata == chain_agset.metadata
    # AGID column carries the owner only when the owner is a graph
    md = store.tables["METADATA"]
    by_owner = {r[md.col("ID")]: r[md.col("AGID")] for r in md.rows}
    assert by_owner["ag1"] == "ag1"
    assert by_owner["TESTCORP"] is None


def test_round_trip_random_agsets():
    rng = random.Random(11)
    for trial in range(25):
        agset = random_agset(rng, agset_id=f"corp{trial}", with_structures=True)
        store = TableStore(None)
        store.store_agset(agset)
        assert store.load_agset(agset.agset_id) == agset


def test_redundant_agsetid_consistency(chain_agset):
    store = TableStore(None)
    store.store_agset(chain_agset)
    ag_table = store.tables["AG"]
    owners = {
        r[ag_table.col("AGID")]: r[ag_table.col("AGSETID")] for r in ag_table.rows
    }
    anchor_table = store.tables["ANCHOR"]
    for row in anchor_table.rows:
        assert row[anchor_table.col("AGSETID")] == owners[row[anchor_table.col("AGID")]]


def test_restore_replaces_rows(chain_agset):
    store = TableStore(None)
    store.store_agset(chain_agset)
    del chain_agset.ags["ag1"].annotations["p3"]
    store.store_agset(chain_agset)
    assert len(_rows_for(store, "ANNOTATION", "TESTCORP")) == 3
    assert store.load_agset("TESTCORP") == chain_agset


def test_store_rejects_invalid_agset():
    agset = AGSet("s")
    ag = agset.add_ag("g")
    ag.add_anchor("a", 0.0)
    ag.add_anchor("b", 1.0)
    ag.add_annotation("n", "a", "b", "wrd")
    ag.annotations["n"].end_anchor = "gone"
    with pytest.raises(StorageFailure):
        TableStore(None).store_agset(agset)


def test_store_rejects_overlong_ids():
    agset = AGSet("x" * 51)
    with pytest.raises(StorageFailure):
        TableStore(None).store_agset(agset)


def test_store_rejects_case_colliding_feature_names(chain_agset):
    chain_agset.ags["ag1"].annotations["p1"].set_feature("Label", "clash")
    with pytest.raises(StorageFailure):
        TableStore(None).store_agset(chain_agset)


def test_store_rejects_cross_agset_id_collision(chain_agset):
    store = TableStore(None)
    store.store_agset(chain_agset)
    other = build_chain_agset("OTHER")  # same ag/anchor/annotation ids
    with pytest.raises(StorageFailure):
        store.store_agset(other)


# -- feature-table evolution ---------------------------------------------------


def _corpus_with_features(**features):
    agset = AGSet("ABC")
    ag = agset.add_ag("g")
    ag.add_anchor("x1", 0.0)
    ag.add_anchor("x2", 1.0)
    ag.add_annotation("n1", "x1", "x2", "obs", dict(features))
    return agset


def test_evolve_adds_column():
    store = TableStore(None)
    store.store_agset(_corpus_with_features(GENDER="f", AGE="31"))
    diff = store.evolve_feature_table("ABC", {"GENDER", "AGE", "POB"})
    assert diff.added == ["POB"]
    assert diff.dropped == []
    assert store.tables["ABC"].columns == ["ANNOTATIONID", "AGE", "GENDER", "POB"]


def test_evolve_identity():
    store = TableStore(None)
    store.store_agset(_corpus_with_features(GENDER="f", AGE="31"))
    diff = store.evolve_feature_table("ABC", {"GENDER", "AGE"})
    assert diff.added == [] and diff.dropped == []


def test_evolve_drops_column_and_preserves_values():
    store = TableStore(None)
    store.store_agset(_corpus_with_features(GENDER="f", AGE="31"))
    before = {r[0]: r[store.tables["ABC"].col("AGE")] for r in store.tables["ABC"].rows}
    diff = store.evolve_feature_table("ABC", {"AGE"})
    assert diff.added == [] and diff.dropped == ["GENDER"]
    table = store.tables["ABC"]
    assert table.columns == ["ANNOTATIONID", "AGE"]
    assert {r[0]: r[table.col("AGE")] for r in table.rows} == before


def test_evolve_creates_missing_table():
    store = TableStore(None)
    diff = store.evolve_feature_table("fresh", {"A", "B"})
    assert diff.added == ["A", "B"]
    assert store.tables[feature_table_name("fresh")].columns == ["ANNOTATIONID", "A", "B"]


# -- column policies and versions ----------------------------------------------


def _policy_store():
    agset = AGSet("CALLS")
    ag = agset.add_ag("g")
    ag.add_anchor("a", 0.0)
    ag.add_anchor("b", 1.0)
    ag.add_annotation("obs1", "a", "b", "obs", {"CALLTYPE": "bark", "NOTES": ""})
    store = TableStore(None)
    store.store_agset(agset)
    store.set_column_policy("CALLS", "trainee", {"CALLTYPE"})
    return store


def test_trainee_cannot_write_readonly_column():
    store = _policy_store()
    version = store.row_version("obs1")
    with pytest.raises(PolicyViolation):
        store.update_features("obs1", {"CALLTYPE": "growl"}, "trainee", version)
    table = store.tables["CALLS"]
    assert table.rows[0][table.col("CALLTYPE")] == "bark"
    assert store.row_version("obs1") == version


def test_specialist_writes_and_bumps_version():
    store = _policy_store()
    version = store.row_version("obs1")
    new_version = store.update_features("obs1", {"CALLTYPE": "growl"}, "specialist", version)
    assert new_version == version + 1
    table = store.tables["CALLS"]
    assert table.rows[0][table.col("CALLTYPE")] == "growl"


def test_version_conflict_between_two_writers():
    store = _policy_store()
    seen = store.row_version("obs1")  # both writers read 1
    assert store.update_features("obs1", {"NOTES": "first"}, "specialist", seen) == seen + 1
    with pytest.raises(VersionConflict):
        store.update_features("obs1", {"NOTES": "second"}, "specialist", seen)


def test_update_unknown_annotation():
    store = _policy_store()
    with pytest.raises(UnknownAnnotation):
        store.update_features("ghost", {"NOTES": "x"}, "specialist", 1)


def test_update_creates_new_column():
    store = _policy_store()
    version = store.row_version("obs1")
    store.update_features("obs1", {"checked": "yes"}, "specialist", version)
    table = store.tables["CALLS"]
    assert "CHECKED" in table.columns
    assert table.rows[0][table.col("CHECKED")] == "yes"


def test_policy_for_unknown_column_rejected():
    store = _policy_store()
    with pytest.raises(StorageFailure):
        store.set_column_policy("CALLS", "trainee", {"NOSUCH"})


def test_policy_soundness_random_updates():
    # The protected column's value may only ever change through a role that
    # does not list it read-only; a model value tracks legitimate writes.
    rng = random.Random(5)
    store = _policy_store()
    protected_value = "bark"
    for step in range(200):
        role = rng.choice(("trainee", "specialist"))
        column = rng.choice(("CALLTYPE", "NOTES", "EXTRA"))
        expected = store.row_version("obs1")
        try:
            store.update_features("obs1", {column: f"v{step}"}, role, expected)
        except PolicyViolation:
            assert role == "trainee" and column == "CALLTYPE"
        else:
            if column == "CALLTYPE":
                assert role == "specialist"
                protected_value = f"v{step}"
        table = store.tables["CALLS"]
        assert table.rows[0][table.col("CALLTYPE")] == protected_value


def test_threaded_cas_serializes():
    store = _policy_store()
    competitions = 50
    winners = []

    def writer(tag):
        for i in range(competitions):
            while True:
                seen = store.row_version("obs1")
                try:
                    store.update_features("obs1", {"NOTES": f"{tag}-{i}"}, "specialist", seen)
                    break
                except VersionConflict:
                    continue
        winners.append(tag)

    threads = [threading.Thread(target=writer, args=(t,)) for t in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(winners) == 4
    assert store.row_version("obs1") == 1 + 4 * competitions


# -- SQL emission ----------------------------------------------------------------


def test_emitted_ddl_matches_published_schema():
    emitted = TableStore(None).emit_sql()
    assert normalize_ddl(emitted) == normalize_ddl(golden("schema.sql"))


def test_emitted_ddl_mentions_offset_float():
    assert "OFFSET      FLOAT" in TableStore(None).emit_sql()


def test_emit_counts_for_chain(chain_agset):
    store = TableStore(None)
    store.store_agset(chain_agset)
    script = store.emit_sql()
    assert script.count("INSERT INTO ANNOTATION ") == 4
    assert script.count("INSERT INTO ANCHOR ") == 4
    assert "CREATE TABLE TESTCORP (" in script
    assert script.count("INSERT INTO TESTCORP ") == 4


def test_emit_sql_for_agset_object(chain_agset):
    script = emit_sql(chain_agset)
    assert script.count("INSERT INTO ANNOTATION ") == 4


def test_emit_escapes_quotes():
    agset = AGSet("Q")
    ag = agset.add_ag("g")
    ag.add_anchor("a", 0.0)
    ag.add_anchor("b", 1.0)
    ag.add_annotation("n", "a", "b", "wrd", {"label": "o'clock"})
    assert "'o''clock'" in emit_sql(agset)


def test_persisted_layout(tmp_path, chain_agset):
    root = tmp_path / "db"
    store = TableStore(root)
    store.store_agset(chain_agset)
    names = {p.name for p in root.iterdir()}
    assert {f"{t}.tsv" for t in FIXED_TABLE_ORDER} <= names
    assert "TESTCORP.feature.tsv" in names
    assert "VERSIONS.tsv" in names
