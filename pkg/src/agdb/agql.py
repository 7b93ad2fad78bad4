"""Path-pattern query language: lexer, parser, pretty printer.

Grammar (pinned here; keywords are upper-case only):

    query      := "SELECT" var ("," var)* "WHERE" clause ("AND" clause)* ";"
    clause     := var ("." element)* "." var "<-" ident "/" ident
    element    := var | arc
    arc        := "[" (constraint ("," constraint)*)? "]" "*"?
    constraint := ident ":" (ident | var | string) | ":" (ident | string)

Variables start with an upper-case letter, idents with a lower-case letter
or digit.  A clause names its source as ``database/arctype``.  A starred
arc (``[]*``) matches a path of zero or more arcs of the clause's type and
must carry no constraints.  ``id:V`` binds the matched annotation's id to
V; ``:value`` constrains the label feature; ``field:value`` constrains any
feature field.  Multiple constraints in one arc are conjunctive.  Values
that do not lex as idents are written as double-quoted strings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import LexError, ParseError, UnboundSelectVariable

KEYWORDS = ("SELECT", "WHERE", "AND")

_PUNCT = {
    ".": "DOT", "[": "LBRACKET", "]": "RBRACKET", "*": "STAR", ":": "COLON",
    ",": "COMMA", "/": "SLASH", ";": "SEMI",
}

_IDENT_SHAPE = re.compile(r"^[a-z0-9][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int  # character position; byte_offset() maps to UTF-8 bytes

    def byte_offset(self, source: str) -> int:
        return len(source[: self.pos].encode("utf-8"))


def tokenize(source: str) -> list[Token]:
    """Lex query text; raises LexError (with byte offset) on bad input."""
    tokens: list[Token] = []
    i = 0
    n = len(source)

    def byte_at(pos: int) -> int:
        return len(source[:pos].encode("utf-8"))

    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "<" and source[i + 1 : i + 2] == "-":
            tokens.append(Token("ARROW", "<-", i))
            i += 2
            continue
        if ch in _PUNCT:
            tokens.append(Token(_PUNCT[ch], ch, i))
            i += 1
            continue
        if ch == '"':
            j = i + 1
            out: list[str] = []
            while j < n and source[j] != '"':
                if source[j] == "\\" and j + 1 < n:
                    out.append({"n": "\n", "t": "\t"}.get(source[j + 1], source[j + 1]))
                    j += 2
                else:
                    out.append(source[j])
                    j += 1
            if j >= n:
                raise LexError("unterminated string literal", byte_at(i))
            tokens.append(Token("STRING", "".join(out), i))
            i = j + 1
            continue
        if ch.isascii() and (ch.isalpha() or ch.isdigit() or ch == "_"):
            j = i
            while j < n and source[j].isascii() and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            if word in KEYWORDS:
                tokens.append(Token(word, word, i))
            elif word[0].isupper():
                tokens.append(Token("VAR", word, i))
            elif word[0].islower() or word[0].isdigit():
                tokens.append(Token("IDENT", word, i))
            else:
                raise LexError(f"illegal identifier {word!r}", byte_at(i))
            i = j
            continue
        raise LexError(f"illegal character {ch!r}", byte_at(i))
    tokens.append(Token("EOF", "", n))
    return tokens


# -- AST ----------------------------------------------------------------------

@dataclass(frozen=True)
class Variable:
    name: str


@dataclass(frozen=True)
class FeatureEq:
    field: str
    value: str


@dataclass(frozen=True)
class LabelEq:
    value: str


@dataclass(frozen=True)
class IdBind:
    var: str


Constraint = FeatureEq | LabelEq | IdBind


@dataclass(frozen=True)
class Arc:
    constraints: tuple[Constraint, ...] = ()
    starred: bool = False


PathElement = Variable | Arc


@dataclass(frozen=True)
class Clause:
    path: tuple[PathElement, ...]
    database: str
    arc_type: str

    def arcs(self) -> list[Arc]:
        return [el for el in self.path if isinstance(el, Arc)]

    def starred_arcs(self) -> list[Arc]:
        return [a for a in self.arcs() if a.starred]


@dataclass(frozen=True)
class QueryAst:
    select_vars: tuple[str, ...]
    clauses: tuple[Clause, ...]

    def bound_vars(self) -> set[str]:
        bound: set[str] = set()
        for clause in self.clauses:
            for el in clause.path:
                if isinstance(el, Variable):
                    bound.add(el.name)
                else:
                    bound.update(c.var for c in el.constraints if isinstance(c, IdBind))
        return bound


class _Parser:
    def __init__(self, tokens: list[Token], source: str = ""):
        self.tokens = tokens
        self.source = source
        self.i = 0

    def peek(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "EOF":
            self.i += 1
        return tok

    def expect(self, *kinds: str) -> Token:
        tok = self.peek()
        if tok.kind not in kinds:
            self.fail(tok, set(kinds))
        return self.advance()

    def fail(self, tok: Token, expected: set[str]) -> None:
        raise ParseError(
            f"expected {'/'.join(sorted(expected))}, found {tok.kind} {tok.text!r}",
            tok.byte_offset(self.source) if self.source else tok.pos,
            frozenset(expected),
        )

    def parse_query(self) -> QueryAst:
        self.expect("SELECT")
        select_vars = [self.expect("VAR").text]
        while self.peek().kind == "COMMA":
            self.advance()
            select_vars.append(self.expect("VAR").text)
        self.expect("WHERE")
        clauses = [self.parse_clause()]
        while self.peek().kind == "AND":
            self.advance()
            clauses.append(self.parse_clause())
        self.expect("SEMI")
        self.expect("EOF")
        ast = QueryAst(tuple(select_vars), tuple(clauses))
        bound = ast.bound_vars()
        for var in select_vars:
            if var not in bound:
                raise UnboundSelectVariable(f"select variable {var} is bound in no clause")
        return ast

    def parse_clause(self) -> Clause:
        start = self.expect("VAR")
        path: list[PathElement] = [Variable(start.text)]
        while self.peek().kind == "DOT":
            self.advance()
            tok = self.peek()
            if tok.kind == "VAR":
                self.advance()
                element: PathElement = Variable(tok.text)
            elif tok.kind == "LBRACKET":
                element = self.parse_arc()
            else:
                self.fail(tok, {"VAR", "LBRACKET"})
            prev = path[-1]
            if isinstance(prev, Variable) and isinstance(element, Variable):
                raise ParseError(
                    "adjacent anchor variables are not allowed",
                    tok.byte_offset(self.source) if self.source else tok.pos,
                    frozenset({"LBRACKET"}),
                )
            path.append(element)
        if not isinstance(path[-1], Variable):
            self.fail(self.peek(), {"DOT"})
        if len(path) < 3:
            self.fail(self.peek(), {"DOT"})
        self.expect("ARROW")
        database = self.expect("IDENT").text
        self.expect("SLASH")
        arc_type = self.expect("IDENT").text
        return Clause(tuple(path), database, arc_type)

    def parse_arc(self) -> Arc:
        self.expect("LBRACKET")
        constraints: list[Constraint] = []
        if self.peek().kind != "RBRACKET":
            constraints.append(self.parse_constraint())
            while self.peek().kind == "COMMA":
                self.advance()
                constraints.append(self.parse_constraint())
        self.expect("RBRACKET")
        starred = False
        if self.peek().kind == "STAR":
            star = self.advance()
            starred = True
            if constraints:
                raise ParseError(
                    "a starred arc must not carry constraints",
                    star.byte_offset(self.source) if self.source else star.pos,
                    frozenset({"DOT"}),
                )
        return Arc(tuple(constraints), starred)

    def parse_constraint(self) -> Constraint:
        tok = self.peek()
        if tok.kind == "COLON":
            self.advance()
            value = self.expect("IDENT", "STRING")
            return LabelEq(value.text)
        field = self.expect("IDENT")
        self.expect("COLON")
        value = self.expect("IDENT", "STRING", "VAR")
        if value.kind == "VAR":
            if field.text != "id":
                raise ParseError(
                    f"only id:{value.text} may bind a variable, not {field.text}",
                    value.byte_offset(self.source) if self.source else value.pos,
                    frozenset({"IDENT", "STRING"}),
                )
            return IdBind(value.text)
        return FeatureEq(field.text, value.text)


def parse(tokens: list[Token], source: str = "") -> QueryAst:
    return _Parser(tokens, source).parse_query()


def parse_query(source: str) -> QueryAst:
    """tokenize + parse in one step."""
    return parse(tokenize(source), source)


# -- pretty printer ------------------------------------------------------------

def _value_text(value: str) -> str:
    if _IDENT_SHAPE.match(value) and value not in KEYWORDS:
        return value
    escaped = value.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def _constraint_text(c: Constraint) -> str:
    if isinstance(c, IdBind):
        return f"id:{c.var}"
    if isinstance(c, LabelEq):
        return f":{_value_text(c.value)}"
    return f"{c.field}:{_value_text(c.value)}"


def pretty_print(ast: QueryAst) -> str:
    """Render the surface syntax; parse(pretty_print(q)) == q."""
    clause_texts = []
    for clause in ast.clauses:
        parts = []
        for el in clause.path:
            if isinstance(el, Variable):
                parts.append(el.name)
            else:
                body = ",".join(_constraint_text(c) for c in el.constraints)
                parts.append(f"[{body}]*" if el.starred else f"[{body}]")
        clause_texts.append(f"{'.'.join(parts)} <- {clause.database}/{clause.arc_type}")
    return f"SELECT {', '.join(ast.select_vars)} WHERE {' AND '.join(clause_texts)};"
