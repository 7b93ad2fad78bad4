"""Connect strings and data-source configuration.

A connect string is a ``KEY=value;`` list (keys case-insensitive, trailing
semicolon tolerated).  Values missing from the string are filled in from an
INI-style config file: the section named by the DSN supplies SERVER, USER,
PASSWORD and DATABASE defaults, with USER mapping to uid and PASSWORD to
pwd.  Connect-string values always win over config values.

For the embedded backend the resolved DATABASE value is interpreted as the
root directory of a table store.  The config file is located through the
``AG_ODBC_INI`` environment variable, defaulting to ``~/.odbc.ini``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import MalformedPair, UnknownDsn

CONFIG_ENV_VAR = "AG_ODBC_INI"


@dataclass
class ConnectSpec:
    dsn: str = ""
    server: str = ""
    uid: str = ""
    pwd: str = ""
    database: str = ""
    backend: str = "embedded"  # "embedded" or "sql-emit"
    extras: dict[str, str] = field(default_factory=dict)


_FIELD_KEYS = {"DSN": "dsn", "SERVER": "server", "UID": "uid", "PWD": "pwd",
               "DATABASE": "database", "BACKEND": "backend"}


def parse_connect_string(s: str) -> ConnectSpec:
    """Split ``KEY=value;`` pairs; unknown keys land in the extras map."""
    spec = ConnectSpec()
    for segment in s.split(";"):
        segment = segment.strip()
        if not segment:
            continue
        if "=" not in segment:
            raise MalformedPair(f"connect-string segment without '=': {segment!r}")
        key, value = segment.split("=", 1)
        key = key.strip()
        value = value.strip()
        attr = _FIELD_KEYS.get(key.upper())
        if attr is not None:
            setattr(spec, attr, value)
        else:
            spec.extras[key] = value
    return spec


def parse_ini(config_text: str) -> dict[str, dict[str, str]]:
    """Tolerant INI reader: [section] headers and KEY = VALUE lines."""
    sections: dict[str, dict[str, str]] = {}
    current: dict[str, str] | None = None
    for raw in config_text.splitlines():
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = sections.setdefault(line[1:-1].strip(), {})
            continue
        if current is None or "=" not in line:
            continue
        key, value = line.split("=", 1)
        current[key.strip().upper()] = value.strip()
    return sections


def resolve_config(spec: ConnectSpec, config_text: str) -> ConnectSpec:
    """Fill the unset fields of `spec` from the DSN's config section.

    Raises UnknownDsn when the DSN names no section and the database
    location is still unknown after the merge.
    """
    sections = parse_ini(config_text)
    section = sections.get(spec.dsn) if spec.dsn else None
    resolved = ConnectSpec(
        dsn=spec.dsn, server=spec.server, uid=spec.uid, pwd=spec.pwd,
        database=spec.database, backend=spec.backend, extras=dict(spec.extras),
    )
    if section is not None:
        if not resolved.server:
            resolved.server = section.get("SERVER", "")
        if not resolved.uid:
            resolved.uid = section.get("USER", "")
        if not resolved.pwd:
            resolved.pwd = section.get("PASSWORD", "")
        if not resolved.database:
            # A section without a DATABASE line falls back to the DSN name.
            resolved.database = section.get("DATABASE", resolved.dsn)
    if not resolved.dsn:
        raise UnknownDsn("connect string resolves to no DSN")
    if section is None and not resolved.database:
        raise UnknownDsn(f"DSN {resolved.dsn!r} names no config section")
    return resolved


def load_config_text(path: str | os.PathLike[str] | None = None) -> str:
    """Read the config file named by AG_ODBC_INI (default ~/.odbc.ini)."""
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR) or Path.home() / ".odbc.ini"
    path = Path(path)
    if not path.exists():
        return ""
    return path.read_text(encoding="utf-8")


def resolve_connect_string(s: str, config_path: str | os.PathLike[str] | None = None) -> ConnectSpec:
    """parse + resolve in one step; accepts a bare DSN name as shorthand."""
    if "=" not in s:
        s = f"DSN={s};"
    return resolve_config(parse_connect_string(s), load_config_text(config_path))
