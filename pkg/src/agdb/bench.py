"""Synthetic corpora and the benchmark runner.

Corpus shape: each graph holds one txt arc spanning the whole anchor
chain, a chain of wrd arcs, and a chain of phn arcs subdividing each word
(boundary anchors shared).  Proportions default to ~8.66 words per graph
and ~4.41 phones per word, the shape of a mid-size speech corpus; word and
phone counts are drawn from a clamped normal around those means (min 1).

Determinism: all randomness comes from one ``random.Random(seed)``
(Mersenne Twister) consumed in a fixed order, so a spec generates
byte-identical corpora on every platform.

The runner times the four reference queries under every (mode, domain)
configuration and the long-join scaling pattern, always verifying results
against the exhaustive matcher before the clock starts: timings of wrong
answers are meaningless.
"""

from __future__ import annotations

import json
import platform
import random
import statistics
import sys
import time
from dataclasses import dataclass, field

from . import closure
from .agql import parse_query
from .engine import execute
from .errors import BenchTimeout, OracleMismatch
from .model import AGSet
from .oracle import oracle_match
from .plan import compile as compile_plan
from .store import TableStore

DEFAULT_WORD_LABELS: tuple[str, ...] = (
    "she", "had", "your", "dark", "suit", "in", "greasy", "wash", "water",
    "all", "year", "ask", "me", "to", "carry", "an", "oily", "rag", "like",
    "that", "dont", "ever", "grow", "such", "busy", "little", "things",
)

# Weighted phone alphabet; hv/dcl/ix get fixed shares so the reference
# queries always find work to do.
DEFAULT_PHONE_LABELS: tuple[tuple[str, float], ...] = (
    ("hv", 0.06), ("dcl", 0.08), ("ix", 0.08), ("aa", 0.09), ("eh", 0.08),
    ("ih", 0.08), ("k", 0.08), ("t", 0.09), ("s", 0.09), ("n", 0.09),
    ("l", 0.06), ("r", 0.06), ("w", 0.03), ("iy", 0.03),
)

REFERENCE_AG_COUNT = 1680

QUERY_TEXTS: dict[str, str] = {
    # q1: words whose phone sequence starts with hv and contains dcl
    "q1": "SELECT I WHERE X.[id:I].Y <- db/wrd AND X.[:hv].[]*.[:dcl].[]*.Y <- db/phn;",
    # q2: words starting with hv
    "q2": "SELECT I WHERE X.[id:I].Y <- db/wrd AND X.[:hv].[]*.Y <- db/phn;",
    # q3: words starting with hv and ending with ix
    "q3": "SELECT I WHERE X.[id:I].Y <- db/wrd AND X.[:hv].[]*.[:ix].Y <- db/phn;",
    # q4: words containing dcl
    "q4": "SELECT I WHERE X.[id:I].Y <- db/wrd AND X.[]*.[:dcl].[]*.Y <- db/phn;",
}

MODES = ("kstar", "kstar-array")
DOMAINS = (None, "wrd")
INDEX_TYPES = ("wrd", "phn")
DOMAIN_RESTRICTIONS = (("phn", "wrd"),)


@dataclass(frozen=True)
class CorpusSpec:
    seed: int = 42
    num_ags: int = 168
    mean_words_per_ag: float = 8.66
    mean_phones_per_word: float = 4.41
    agset_id: str = "synth"
    word_labels: tuple[str, ...] = DEFAULT_WORD_LABELS
    phone_labels: tuple[tuple[str, float], ...] = DEFAULT_PHONE_LABELS

    def __post_init__(self):
        if self.num_ags < 0 or self.mean_words_per_ag <= 0 or self.mean_phones_per_word <= 0:
            raise ValueError("corpus spec requires positive sizes")


def scaled_spec(scale: float, seed: int = 42, agset_id: str = "synth") -> CorpusSpec:
    """Spec sized at `scale` times the 1,680-graph reference corpus."""
    return CorpusSpec(seed=seed, num_ags=round(REFERENCE_AG_COUNT * scale), agset_id=agset_id)


def _clamped_count(rng: random.Random, mean: float) -> int:
    return max(1, round(rng.normalvariate(mean, 0.3 * mean)))


def _weighted_label(rng: random.Random, labels: tuple[tuple[str, float], ...]) -> str:
    total = sum(w for _, w in labels)
    x = rng.random() * total
    for label, weight in labels:
        x -= weight
        if x <= 0:
            return label
    return labels[-1][0]


def generate_corpus(spec: CorpusSpec) -> AGSet:
    """Pure function of the spec: same seed, same corpus, byte for byte."""
    rng = random.Random(spec.seed)
    agset = AGSet(spec.agset_id, version="1.0")
    for gi in range(spec.num_ags):
        ag = agset.add_ag(f"ag{gi:04d}")
        word_count = _clamped_count(rng, spec.mean_words_per_ag)
        phone_counts = [
            _clamped_count(rng, spec.mean_phones_per_word) for _ in range(word_count)
        ]
        total_phones = sum(phone_counts)
        offset = 0.0
        anchor_ids = []
        for k in range(total_phones + 1):
            anchor_ids.append(ag.add_anchor(f"{ag.ag_id}:a{k:03d}", offset=offset).anchor_id)
            offset += 0.03 + 0.22 * rng.random()
        word_labels = [rng.choice(spec.word_labels) for _ in range(word_count)]
        ag.add_annotation(
            f"{ag.ag_id}:t0", anchor_ids[0], anchor_ids[-1], "txt",
            {"label": " ".join(word_labels)},
        )
        boundary = 0
        phone_serial = 0
        for wi in range(word_count):
            start = boundary
            boundary += phone_counts[wi]
            ag.add_annotation(
                f"{ag.ag_id}:w{wi:02d}", anchor_ids[start], anchor_ids[boundary], "wrd",
                {"label": word_labels[wi]},
            )
            for pi in range(phone_counts[wi]):
                ag.add_annotation(
                    f"{ag.ag_id}:p{phone_serial:03d}",
                    anchor_ids[start + pi], anchor_ids[start + pi + 1], "phn",
                    {"label": _weighted_label(rng, spec.phone_labels)},
                )
                phone_serial += 1
    return agset


def build_all_indexes(store: TableStore, agset: AGSet) -> dict[str, int]:
    """Build tuple and matrix indexes for wrd, phn, and phn/wrd."""
    sizes: dict[str, int] = {}
    tags = [(t, None) for t in INDEX_TYPES] + list(DOMAIN_RESTRICTIONS)
    for type_name, domain in tags:
        tag = closure.index_tag(type_name, domain)
        sizes[tag] = closure.store_kstar(store, agset, type_name, domain)
        closure.store_kstar_arrays(store, agset, type_name, domain)
    return sizes


def matrix_count(store: TableStore, agset: AGSet) -> int:
    table = store.tables.get("KSTAR_ARRAY")
    if table is None:
        return 0
    ag_ids = set(agset.ags)
    return sum(1 for row in table.rows if row[0] in ag_ids)


@dataclass(frozen=True)
class TimingCell:
    query: str
    mode: str
    domain: str | None
    seconds: float
    rows: int


@dataclass(frozen=True)
class LongJoinCell:
    n: int
    mode: str
    seconds: float | None
    timed_out: bool
    rows: int | None


@dataclass
class BenchReport:
    corpus: dict
    index_sizes: dict[str, int]
    matrices: int
    cells: list[TimingCell] = field(default_factory=list)
    long_joins: list[LongJoinCell] = field(default_factory=list)
    environment: dict = field(default_factory=dict)

    def cell(self, query: str, mode: str, domain: str | None) -> TimingCell:
        for c in self.cells:
            if (c.query, c.mode, c.domain) == (query, mode, domain):
                return c
        raise KeyError((query, mode, domain))

    def to_json(self) -> str:
        return json.dumps(
            {
                "corpus": self.corpus,
                "index_sizes": self.index_sizes,
                "matrices": self.matrices,
                "timings": [
                    {
                        "query": c.query, "mode": c.mode, "domain": c.domain,
                        "seconds": c.seconds, "rows": c.rows,
                    }
                    for c in self.cells
                ],
                "long_joins": [
                    {
                        "n": c.n, "mode": c.mode, "seconds": c.seconds,
                        "timed_out": c.timed_out, "rows": c.rows,
                    }
                    for c in self.long_joins
                ],
                "environment": self.environment,
            },
            indent=2,
        )

    def format_table(self) -> str:
        lines = [
            f"corpus {self.corpus.get('agset_id')}: "
            f"{self.corpus.get('ags')} graphs, {self.corpus.get('annotations')} annotations",
            "index sizes: " + ", ".join(f"{k}={v}" for k, v in sorted(self.index_sizes.items()))
            + f"; matrices={self.matrices}",
            "",
            f"{'query':<8}{'mode':<14}{'domain':<10}{'seconds':>10}{'rows':>8}",
        ]
        for c in self.cells:
            lines.append(
                f"{c.query:<8}{c.mode:<14}{c.domain or '-':<10}{c.seconds:>10.4f}{c.rows:>8}"
            )
        if self.long_joins:
            lines.append("")
            lines.append(f"{'n':<4}{'mode':<14}{'seconds':>10}{'rows':>8}")
            for c in self.long_joins:
                seconds = "timeout" if c.timed_out else f"{c.seconds:.4f}"
                rows = "-" if c.rows is None else str(c.rows)
                lines.append(f"{c.n:<4}{c.mode:<14}{seconds:>10}{rows:>8}")
        return "\n".join(lines)


def _environment() -> dict:
    return {
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "runs": None,
    }


def _median_time(plan, store, runs: int, deadline_budget: float | None = None) -> tuple[float, bool]:
    samples = []
    for _ in range(runs):
        start = time.perf_counter()
        deadline = None if deadline_budget is None else start + deadline_budget
        try:
            execute(plan, store, deadline=deadline)
        except BenchTimeout:
            return (time.perf_counter() - start, True)
        samples.append(time.perf_counter() - start)
    return (statistics.median(samples), False)


def corpus_summary(agset: AGSet) -> dict:
    counts: dict[str, int] = {}
    for ann in agset.all_annotations():
        counts[ann.type] = counts.get(ann.type, 0) + 1
    return {
        "agset_id": agset.agset_id,
        "ags": len(agset.ags),
        "annotations": sum(counts.values()),
        "anchors": sum(len(ag.anchors) for ag in agset.ags.values()),
        "by_type": counts,
    }


def run_benchmarks(
    agset: AGSet,
    store: TableStore,
    runs: int = 5,
    index_sizes: dict[str, int] | None = None,
) -> BenchReport:
    """Time the reference queries in every configuration, oracle-verified."""
    if index_sizes is None:
        ks = store.tables.get("KSTAR")
        index_sizes = {}
        if ks is not None:
            for row in ks.rows:
                index_sizes[row[2]] = index_sizes.get(row[2], 0) + 1
    report = BenchReport(
        corpus=corpus_summary(agset),
        index_sizes=index_sizes,
        matrices=matrix_count(store, agset),
        environment=_environment() | {"runs": runs},
    )
    for name, text in QUERY_TEXTS.items():
        ast = parse_query(text)
        expected = oracle_match(ast, agset)
        for mode in MODES:
            for domain in DOMAINS:
                plan = compile_plan(ast, store, mode=mode, domain_tag=domain)
                got = execute(plan, store)  # verification doubles as warm-up
                if got.rows != expected.rows:
                    raise OracleMismatch(
                        f"{name} ({mode}, domain={domain}) returned {len(got.rows)} rows, "
                        f"oracle says {len(expected.rows)}"
                    )
                seconds, _ = _median_time(plan, store, runs)
                report.cells.append(TimingCell(name, mode, domain, seconds, len(got.rows)))
    return report


def long_join_labels(agset: AGSet, max_n: int) -> list[str]:
    """Phone labels of a longest word, so the pattern can match that word.

    When no word has max_n phones the tail cycles through the longest
    word's labels; results may then be empty, which the runner tolerates.
    """
    best: list[str] = []
    for ag in agset.ags.values():
        phones = sorted(
            (ann for ann in ag.annotations.values() if ann.type == "phn"),
            key=lambda a: (ag.anchors[a.start_anchor].offset or 0.0),
        )
        for word in ag.annotations.values():
            if word.type != "wrd":
                continue
            start = ag.anchors[word.start_anchor].offset
            end = ag.anchors[word.end_anchor].offset
            labels = [
                p.features.get("label", "")
                for p in phones
                if start is not None and end is not None
                and (ag.anchors[p.start_anchor].offset or 0.0) >= start
                and (ag.anchors[p.end_anchor].offset or 0.0) <= end
            ]
            if len(labels) > len(best):
                best = labels
    if not best:
        return []
    return [best[i % len(best)] for i in range(max_n)]


def long_join_query(labels: list[str]) -> str:
    chain = "".join(f".[:{label}].[]*" for label in labels)
    return f"SELECT I WHERE X.[id:I].Y <- db/wrd AND X{chain}.Y <- db/phn;"


def run_long_joins(
    agset: AGSet,
    store: TableStore,
    max_n: int = 5,
    runs: int = 3,
    timeout: float = 20.0,
) -> list[LongJoinCell]:
    """Scaling run for the n-segment closure pattern, both modes."""
    labels = long_join_labels(agset, max_n)
    cells: list[LongJoinCell] = []
    for n in range(1, max_n + 1):
        text = long_join_query(labels[:n])
        ast = parse_query(text)
        expected = oracle_match(ast, agset)
        for mode in MODES:
            plan = compile_plan(ast, store, mode=mode)
            try:
                got = execute(plan, store, deadline=time.perf_counter() + timeout)
            except BenchTimeout:
                cells.append(LongJoinCell(n, mode, None, True, None))
                continue
            if got.rows != expected.rows:
                raise OracleMismatch(
                    f"long-join n={n} ({mode}) returned {len(got.rows)} rows, "
                    f"oracle says {len(expected.rows)}"
                )
            seconds, timed_out = _median_time(plan, store, runs, deadline_budget=timeout)
            cells.append(
                LongJoinCell(n, mode, None if timed_out else seconds, timed_out, len(got.rows))
            )
    return cells
