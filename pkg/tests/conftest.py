import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from agdb.model import AGSet

GOLDEN_DIR = Path(__file__).parent / "golden"


def build_chain_agset(agset_id: str = "TESTCORP") -> AGSet:
    """One word spanning the phone chain hv dcl ix over anchors at 0..3."""
    agset = AGSet(agset_id, version="1.0")
    ag = agset.add_ag("ag1")
    for i, offset in enumerate((0.0, 1.0, 2.0, 3.0)):
        ag.add_anchor(f"a{i + 1}", offset=offset)
    ag.add_annotation("p1", "a1", "a2", "phn", {"label": "hv"})
    ag.add_annotation("p2", "a2", "a3", "phn", {"label": "dcl"})
    ag.add_annotation("p3", "a3", "a4", "phn", {"label": "ix"})
    ag.add_annotation("w1", "a1", "a4", "wrd", {"label": "water"})
    return agset


def build_two_word_agset() -> AGSet:
    """Two words sharing boundary a3; phones subdivide both words."""
    agset = AGSet("TWOWORD", version="1.0")
    ag = agset.add_ag("ag1")
    for i, offset in enumerate((0.0, 1.0, 2.0, 3.0, 4.0)):
        ag.add_anchor(f"b{i + 1}", offset=offset)
    ag.add_annotation("q1", "b1", "b2", "phn", {"label": "hv"})
    ag.add_annotation("q2", "b2", "b3", "phn", {"label": "dcl"})
    ag.add_annotation("q3", "b3", "b4", "phn", {"label": "ix"})
    ag.add_annotation("q4", "b4", "b5", "phn", {"label": "aa"})
    ag.add_annotation("w1", "b1", "b3", "wrd", {"label": "dark"})
    ag.add_annotation("w2", "b3", "b5", "wrd", {"label": "suit"})
    return agset


@pytest.fixture
def chain_agset() -> AGSet:
    return build_chain_agset()


@pytest.fixture
def timit_agset() -> AGSet:
    # Corpus named "timit" so its feature table is TIMIT, as in the goldens.
    return build_chain_agset("timit")


@pytest.fixture
def two_word_agset() -> AGSet:
    return build_two_word_agset()


def golden(name: str) -> str:
    return (GOLDEN_DIR / name).read_text(encoding="utf-8")
