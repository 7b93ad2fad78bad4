import pytest
from hypothesis import given, settings, strategies as st

from agdb.agql import (
    Arc,
    Clause,
    FeatureEq,
    IdBind,
    LabelEq,
    QueryAst,
    Variable,
    parse_query,
    pretty_print,
    tokenize,
)
from agdb.errors import LexError, ParseError, UnboundSelectVariable

QUERY1 = (
    "SELECT I WHERE  X.[id:I].Y <- db/wrd AND "
    "X.[:hv].[]*.[:dcl].[]*.Y <- db/phn;"
)


def kinds(text):
    return [t.kind for t in tokenize(text)][:-1]  # drop EOF


def test_tokenize_star_path():
    assert kinds("X.[]*.Y") == [
        "VAR", "DOT", "LBRACKET", "RBRACKET", "STAR", "DOT", "VAR",
    ]


def test_tokenize_clause_tail():
    toks = tokenize("<- db/phn;")
    assert [(t.kind, t.text) for t in toks[:-1]] == [
        ("ARROW", "<-"), ("IDENT", "db"), ("SLASH", "/"), ("IDENT", "phn"), ("SEMI", ";"),
    ]


def test_tokenize_illegal_character_offset():
    with pytest.raises(LexError) as err:
        tokenize("X.[#].Y")
    assert err.value.offset == 3


def test_tokenize_reports_byte_offsets():
    with pytest.raises(LexError) as err:
        tokenize('"é"#')  # two-byte char inside a string literal
    assert err.value.offset == 5


def test_parse_query1():
    ast = parse_query(QUERY1)
    assert ast.select_vars == ("I",)
    assert len(ast.clauses) == 2
    wrd, phn = ast.clauses
    assert (wrd.database, wrd.arc_type) == ("db", "wrd")
    assert wrd.path == (Variable("X"), Arc((IdBind("I"),), False), Variable("Y"))
    assert phn.path == (
        Variable("X"),
        Arc((LabelEq("hv"),), False),
        Arc((), True),
        Arc((LabelEq("dcl"),), False),
        Arc((), True),
        Variable("Y"),
    )


def test_parse_minimal_query():
    ast = parse_query("SELECT I WHERE X.[id:I].Y <- db/wrd;")
    assert len(ast.clauses) == 1
    assert ast.clauses[0].starred_arcs() == []


def test_parse_query4_leading_and_trailing_stars():
    ast = parse_query("SELECT I WHERE X.[id:I].Y <- db/wrd AND X.[]*.[:dcl].[]*.Y <- db/phn;")
    phn = ast.clauses[1]
    arcs = phn.arcs()
    assert [a.starred for a in arcs] == [True, False, True]


def test_unbound_select_variable():
    with pytest.raises(UnboundSelectVariable):
        parse_query("SELECT Z WHERE X.[id:I].Y <- db/wrd;")


def test_starred_arc_with_constraints_rejected():
    with pytest.raises(ParseError):
        parse_query("SELECT X WHERE X.[x:y]*.Y <- db/phn;")


def test_adjacent_variables_rejected():
    with pytest.raises(ParseError):
        parse_query("SELECT X WHERE X.Y <- db/wrd;")


def test_variable_value_only_for_id():
    with pytest.raises(ParseError):
        parse_query("SELECT X WHERE X.[label:V].Y <- db/wrd;")


def test_lowercase_keywords_rejected():
    with pytest.raises(ParseError):
        parse_query("select I WHERE X.[id:I].Y <- db/wrd;")


def test_parse_error_position_is_inside_input():
    bad = "SELECT I WHERE X.[id:I].Y <- db/wrd"  # missing semicolon
    with pytest.raises(ParseError) as err:
        parse_query(bad)
    assert 0 <= err.value.offset <= len(bad.encode("utf-8"))


def test_interior_variables_allowed():
    ast = parse_query("SELECT M WHERE X.[:a].M.[:b].Y <- db/phn;")
    assert Variable("M") in ast.clauses[0].path


def test_quoted_values():
    ast = parse_query('SELECT I WHERE X.[id:I,note:"a b\\"c"].Y <- db/wrd;')
    constraints = ast.clauses[0].arcs()[0].constraints
    assert FeatureEq("note", 'a b"c') in constraints


# -- property: parse(pretty_print(ast)) == ast ----------------------------------

_varnames = st.from_regex(r"[A-Z][A-Za-z0-9_]{0,4}", fullmatch=True).filter(
    lambda v: v not in ("SELECT", "WHERE", "AND")
)
_idents = st.from_regex(r"[a-z][a-z0-9_]{0,6}", fullmatch=True)
_values = st.text(max_size=8).filter(lambda s: "\x00" not in s)

_constraints = st.one_of(
    st.builds(LabelEq, _values),
    st.builds(FeatureEq, _idents.filter(lambda f: f != "id"), _values),
    st.builds(IdBind, _varnames),
)


@st.composite
def _clauses(draw) -> Clause:
    n_arcs = draw(st.integers(1, 4))
    path = [Variable(draw(_varnames))]
    for i in range(n_arcs):
        if draw(st.booleans()):
            path.append(Arc((), True))
        else:
            path.append(Arc(tuple(draw(st.lists(_constraints, max_size=2))), False))
        if i < n_arcs - 1 and draw(st.booleans()):
            path.append(Variable(draw(_varnames)))
    path.append(Variable(draw(_varnames)))
    return Clause(tuple(path), draw(_idents), draw(_idents))


@st.composite
def _queries(draw) -> QueryAst:
    clauses = tuple(draw(st.lists(_clauses(), min_size=1, max_size=2)))
    bound = sorted(QueryAst((), clauses).bound_vars())
    select = draw(st.lists(st.sampled_from(bound), min_size=1, max_size=2, unique=True))
    return QueryAst(tuple(select), clauses)


@settings(max_examples=150, deadline=None)
@given(ast=_queries())
def test_pretty_print_parse_fixpoint(ast):
    assert parse_query(pretty_print(ast)) == ast


@settings(max_examples=150, deadline=None)
@given(ast=_queries())
def test_accepted_clauses_alternate(ast):
    reparsed = parse_query(pretty_print(ast))
    for clause in reparsed.clauses:
        path = clause.path
        assert isinstance(path[0], Variable) and isinstance(path[-1], Variable)
        for a, b in zip(path, path[1:]):
            assert not (isinstance(a, Variable) and isinstance(b, Variable))
