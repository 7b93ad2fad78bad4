"""Seeded random generators shared by the engine tests and the acceptance suite.

Everything draws from a caller-supplied random.Random so runs are
reproducible.  Generated AGSets use store-safe ids (globally unique,
within length limits) and identifier-shaped feature names, so they can be
persisted and queried as well as round-tripped.
"""

from __future__ import annotations

import random

from agdb import closure
from agdb.model import AGSet
from agdb.store import TableStore

LABEL_POOL = ("hv", "dcl", "ix", "aa", "k", "s")
TYPE_POOL = ("wrd", "phn", "txt")
EXTRA_FEATURES = ("qc", "edited", "note")
VAR_POOL = ("X", "Y", "Z", "U", "V", "M", "N")


def random_agset(
    rng: random.Random,
    agset_id: str = "corp",
    max_ags: int = 6,
    max_anchors: int = 10,
    min_ags: int = 0,
    with_structures: bool = False,
) -> AGSet:
    agset = AGSet(agset_id, version="1")
    if with_structures:
        for t in range(rng.randint(0, 2)):
            tl = agset.add_timeline(f"{agset_id}-tl{t}")
            for s in range(rng.randint(0, 2)):
                tl.add_signal(
                    f"{agset_id}-tl{t}s{s}", mimeclass="audio",
                    mimetype="audio/wav", unit="s", track=str(s),
                )
        if rng.random() < 0.7:
            agset.set_metadata(agset_id, "creator", "gen")
    timelines = sorted(agset.timelines)
    for g in range(rng.randint(min_ags, max_ags)):
        timeline_id = rng.choice(timelines) if timelines and rng.random() < 0.5 else None
        ag = agset.add_ag(f"{agset_id}-g{g}", timeline_id)
        n_anchors = rng.randint(2, max_anchors)
        offset = 0.0
        anchor_ids = []
        for i in range(n_anchors):
            offset += rng.random() * 2
            has_offset = rng.random() < 0.9
            anchor_ids.append(
                ag.add_anchor(
                    f"{agset_id}-g{g}a{i}", offset=offset if has_offset else None
                ).anchor_id
            )
        for k in range(rng.randint(0, 2 * n_anchors)):
            i = rng.randrange(0, n_anchors - 1)
            j = rng.randrange(i + 1, n_anchors)
            features = {"label": rng.choice(LABEL_POOL)}
            if rng.random() < 0.3:
                features[rng.choice(EXTRA_FEATURES)] = rng.choice(("1", "2", "yes"))
            ag.add_annotation(
                f"{agset_id}-g{g}n{k}", anchor_ids[i], anchor_ids[j],
                rng.choice(TYPE_POOL), features,
            )
        if with_structures and rng.random() < 0.3:
            agset.set_metadata(ag.ag_id, "pass", str(g))
    return agset


def random_query(
    rng: random.Random,
    agset: AGSet,
    max_clauses: int = 2,
    max_starred: int = 3,
) -> str:
    types = sorted(agset.annotation_types())
    labels = sorted(
        {a.features["label"] for a in agset.all_annotations() if "label" in a.features}
    )
    features = sorted(n for n in agset.feature_names() if n != "label")
    has_label = any("label" in a.features for a in agset.all_annotations())

    star_budget = rng.randint(0, max_starred)
    stars_used = 0
    used_vars: list[str] = []
    id_vars: list[str] = []

    def pick_var() -> str:
        nonlocal used_vars
        if used_vars and rng.random() < 0.45:
            return rng.choice(used_vars)
        for name in VAR_POOL:
            if name not in used_vars:
                used_vars.append(name)
                return name
        return rng.choice(used_vars)

    clause_texts = []
    for _ in range(rng.randint(1, max_clauses)):
        arc_type = rng.choice(types) if types else rng.choice(("wrd", "phn"))
        parts = [pick_var()]
        n_arcs = rng.randint(1, 3)
        for a in range(n_arcs):
            if stars_used < star_budget and rng.random() < 0.4:
                stars_used += 1
                parts.append("[]*")
            else:
                constraints = []
                if has_label and rng.random() < 0.75:
                    value = rng.choice(labels) if labels and rng.random() < 0.8 else "zz"
                    constraints.append(f":{value}")
                if rng.random() < 0.3:
                    if id_vars and rng.random() < 0.3:
                        id_var = rng.choice(id_vars)
                    else:
                        id_var = f"I{len(id_vars)}"
                        id_vars.append(id_var)
                    constraints.append(f"id:{id_var}")
                if features and rng.random() < 0.2:
                    constraints.append(f"{rng.choice(features)}:{rng.choice(('1', '2', 'yes', 'zz'))}")
                parts.append("[" + ",".join(constraints) + "]")
            if a < n_arcs - 1 and rng.random() < 0.25:
                parts.append(pick_var())
        parts.append(pick_var())
        db = agset.agset_id if rng.random() < 0.5 else "db"
        clause_texts.append(f"{'.'.join(parts)} <- {db}/{arc_type}")

    bound = sorted(set(used_vars) | set(id_vars))
    n_select = rng.randint(1, min(2, len(bound)))
    select = rng.sample(bound, n_select)
    return f"SELECT {', '.join(select)} WHERE {' AND '.join(clause_texts)};"


def prepare_store(agset: AGSet) -> TableStore:
    """In-memory store with tuple and matrix indexes for every arc type."""
    store = TableStore(None)
    store.store_agset(agset)
    for arc_type in sorted(agset.annotation_types() | {"wrd", "phn"}):
        closure.store_kstar(store, agset, arc_type)
        closure.store_kstar_arrays(store, agset, arc_type)
    return store
