import pytest

from agdb.connect import (
    ConnectSpec,
    parse_connect_string,
    resolve_config,
    resolve_connect_string,
)
from agdb.errors import MalformedPair, UnknownDsn

SAMPLE_INI = """\
[talkbank]
Driver   = /usr/local/lib/libmyodbc.so
DSN      = talkbank
SERVER   = talkbank.ldc.upenn.edu
USER     = myuserid
PASSWORD = mypasswd
DATABASE = talkbank
"""


def test_parse_dsn_only():
    spec = parse_connect_string("DSN=talkbank;")
    assert spec.dsn == "talkbank"
    assert spec.uid == "" and spec.pwd == "" and spec.server == ""


def test_parse_full_string():
    spec = parse_connect_string("DSN=talkbank;UID=myuserid;PWD=mypasswd;")
    assert (spec.dsn, spec.uid, spec.pwd) == ("talkbank", "myuserid", "mypasswd")


def test_parse_empty_string():
    assert parse_connect_string("") == ConnectSpec()


def test_parse_is_case_insensitive_and_keeps_extras():
    spec = parse_connect_string("dsn=x;Server=h;OPTION=3;")
    assert spec.dsn == "x"
    assert spec.server == "h"
    assert spec.extras == {"OPTION": "3"}


def test_parse_rejects_segment_without_equals():
    with pytest.raises(MalformedPair):
        parse_connect_string("DSN=x;nonsense;")


def test_resolve_fills_from_section():
    spec = resolve_config(parse_connect_string("DSN=talkbank;"), SAMPLE_INI)
    assert spec.dsn == "talkbank"
    assert spec.server == "talkbank.ldc.upenn.edu"
    assert spec.uid == "myuserid"
    assert spec.pwd == "mypasswd"
    assert spec.database == "talkbank"


def test_connect_string_overrides_config():
    spec = resolve_config(parse_connect_string("DSN=talkbank;UID=other;"), SAMPLE_INI)
    assert spec.uid == "other"
    assert spec.pwd == "mypasswd"


def test_unknown_dsn():
    with pytest.raises(UnknownDsn):
        resolve_config(parse_connect_string("DSN=nosuch;"), SAMPLE_INI)


def test_unknown_dsn_tolerated_with_explicit_database():
    spec = resolve_config(
        parse_connect_string("DSN=nosuch;DATABASE=/tmp/store;"), SAMPLE_INI
    )
    assert spec.database == "/tmp/store"


def test_database_falls_back_to_dsn_inside_section():
    ini = "[short]\nSERVER = h\n"
    spec = resolve_config(parse_connect_string("DSN=short;"), ini)
    assert spec.database == "short"


def test_resolve_connect_string_accepts_bare_dsn(tmp_path, monkeypatch):
    root = tmp_path / "storehome"
    config = tmp_path / "odbc.ini"
    config.write_text(f"[mydata]\nDATABASE = {root}\n", encoding="utf-8")
    monkeypatch.setenv("AG_ODBC_INI", str(config))
    assert resolve_connect_string("mydata").database == str(root)
    assert resolve_connect_string("DSN=mydata;").database == str(root)
