"""Shared TSV cell conventions.

Cells are backslash-escaped (tab, newline, backslash); the two-character
sequence ``\\N`` marks a missing value, which keeps an absent feature
distinguishable from an empty string.  Rows are newline-terminated.
"""

from __future__ import annotations

NULL = "\\N"

_UNESCAPE = {"t": "\t", "n": "\n", "\\": "\\"}


def escape_cell(value: str | None) -> str:
    if value is None:
        return NULL
    return value.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def unescape_cell(cell: str) -> str | None:
    if cell == NULL:
        return None
    out: list[str] = []
    i = 0
    while i < len(cell):
        ch = cell[i]
        if ch == "\\" and i + 1 < len(cell):
            out.append(_UNESCAPE.get(cell[i + 1], cell[i + 1]))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def format_row(cells: list[str | None]) -> str:
    return "\t".join(escape_cell(c) for c in cells) + "\n"


def parse_row(line: str) -> list[str | None]:
    return [unescape_cell(c) for c in line.split("\t")]
