"""Exhaustive pattern matcher used to verify the query engine.

This matcher works directly on the in-memory graphs with no knowledge of
plans, closure tables, or the store: clauses are matched by backtracking
over anchors and arcs, starred segments by explicit path enumeration.  A
zero-length path counts at an anchor only when the anchor touches at least
one arc of the segment's type, mirroring how the closure relation defines
reflexivity.  Field names in constraints match feature names
case-insensitively, as they do in the relational engine.
"""

from __future__ import annotations

from collections import defaultdict, deque

from .agql import Arc, Clause, FeatureEq, IdBind, LabelEq, QueryAst, Variable
from .engine import ResultSet
from .model import AG, AGSet, Annotation


def _feature_value(ann: Annotation, field: str) -> str | None:
    if field in ann.features:
        return ann.features[field]
    lowered = field.lower()
    for name, value in ann.features.items():
        if name.lower() == lowered:
            return value
    return None


def _constraints_ok(ann: Annotation, arc: Arc) -> bool:
    for c in arc.constraints:
        if isinstance(c, LabelEq):
            if _feature_value(ann, "label") != c.value:
                return False
        elif isinstance(c, FeatureEq):
            if _feature_value(ann, c.field) != c.value:
                return False
    return True


class _ClauseMatcher:
    def __init__(self, clause: Clause, ag: AG):
        self.clause = clause
        self.ag = ag
        self.by_start: dict[str, list[Annotation]] = defaultdict(list)
        self.incident: set[str] = set()
        adjacency: dict[str, set[str]] = defaultdict(set)
        for ann in ag.annotations.values():
            if ann.type == clause.arc_type:
                self.by_start[ann.start_anchor].append(ann)
                self.incident.add(ann.start_anchor)
                self.incident.add(ann.end_anchor)
                adjacency[ann.start_anchor].add(ann.end_anchor)
        self.adjacency = adjacency
        self._reach_memo: dict[str, set[str]] = {}

    def reachable(self, anchor: str) -> set[str]:
        """Anchors at the end of a length >= 0 path of clause-type arcs."""
        cached = self._reach_memo.get(anchor)
        if cached is not None:
            return cached
        result: set[str] = set()
        if anchor in self.incident:
            result.add(anchor)
            seen = {anchor}
            queue = deque([anchor])
            while queue:
                node = queue.popleft()
                for nxt in self.adjacency[node]:
                    if nxt not in seen:
                        seen.add(nxt)
                        result.add(nxt)
                        queue.append(nxt)
        self._reach_memo[anchor] = result
        return result

    def solutions(self) -> list[dict[str, str]]:
        out: list[dict[str, str]] = []
        path = self.clause.path
        seen: set[tuple] = set()

        def emit(binding: dict[str, str]) -> None:
            key = tuple(sorted(binding.items()))
            if key not in seen:
                seen.add(key)
                out.append(binding)

        def walk(i: int, at: str, binding: dict[str, str]) -> None:
            if i == len(path):
                emit(binding)
                return
            el = path[i]
            if isinstance(el, Variable):
                known = binding.get(el.name)
                if known is not None:
                    if known == at:
                        walk(i + 1, at, binding)
                    return
                walk(i + 1, at, {**binding, el.name: at})
                return
            if el.starred:
                for nxt in self.reachable(at):
                    walk(i + 1, nxt, binding)
                return
            for ann in self.by_start.get(at, ()):
                if not _constraints_ok(ann, el):
                    continue
                next_binding = binding
                ok = True
                for c in el.constraints:
                    if isinstance(c, IdBind):
                        known = next_binding.get(c.var)
                        if known is not None and known != ann.annotation_id:
                            ok = False
                            break
                        next_binding = {**next_binding, c.var: ann.annotation_id}
                if ok:
                    walk(i + 1, ann.end_anchor, next_binding)

        for anchor in self.ag.anchors:
            walk(0, anchor, {})
        return out


def _match_clause(clause: Clause, agset: AGSet) -> list[dict[str, str]]:
    out: list[dict[str, str]] = []
    for ag in agset.ags.values():
        out.extend(_ClauseMatcher(clause, ag).solutions())
    return out


def _clause_vars(clause: Clause) -> set[str]:
    names: set[str] = set()
    for el in clause.path:
        if isinstance(el, Variable):
            names.add(el.name)
        else:
            names.update(c.var for c in el.constraints if isinstance(c, IdBind))
    return names


def oracle_match(ast: QueryAst, agset: AGSet) -> ResultSet:
    """All bindings of the select variables satisfying every clause."""
    combined: list[dict[str, str]] = [{}]
    bound_vars: set[str] = set()
    for clause in ast.clauses:
        # Every solution of one clause binds the same variable set, so the
        # natural join keys on the vars shared with earlier clauses.
        solutions = _match_clause(clause, agset)
        clause_vars = _clause_vars(clause)
        shared = tuple(sorted(bound_vars & clause_vars))
        index: dict[tuple, list[dict[str, str]]] = defaultdict(list)
        for sol in solutions:
            index[tuple(sol[v] for v in shared)].append(sol)
        merged: list[dict[str, str]] = []
        for acc in combined:
            for sol in index.get(tuple(acc[v] for v in shared), ()):
                merged.append({**acc, **sol})
        combined = merged
        bound_vars |= clause_vars
        if not combined:
            break
    rows = {
        tuple(binding[v] for v in ast.select_vars)
        for binding in combined
        if all(v in binding for v in ast.select_vars)
    }
    return ResultSet(vars=tuple(ast.select_vars), rows=tuple(sorted(rows)))
