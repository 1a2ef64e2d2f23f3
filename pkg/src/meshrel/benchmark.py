"""Benchmark protocol for relatedness measures.

Relevance judgements arrive per passage and are lifted to publications by
taking the maximum grade. Topics where fewer than 10% of the judged
publications are graded 1 or 2 are dropped. Only grades 0 (not relevant) and
2 (relevant) enter either test.

Test 1 compares the scores of relevant-relevant pairs (``rr``) against
not-relevant-relevant pairs (``nrr``) with Cliff's delta, pooled over topics.

Test 2 repeatedly samples 10 relevant and 10 not-relevant publications per
topic and classifies every other judged publication as relevant when its most
related sampled publication is one of the relevant ones. Predictions are
scored with precision, recall and the Matthews correlation coefficient.
"""

from __future__ import annotations

import hashlib
import logging
import math
import random
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError, MeshRelError
from .measures import MeasureSpec, Orientation, compute, score_matrix
from .vocab import Corpus

logger = logging.getLogger(__name__)

GRADES = (0, 1, 2)
NOT_RELEVANT, POSSIBLY_RELEVANT, RELEVANT = GRADES
# truncation points of the density plots; larger values go to the overflow bin
DEFAULT_RANGES = {Orientation.SIMILARITY: (0.0, 0.5), Orientation.DISTANCE: (0.0, 17.5)}


@dataclass(frozen=True)
class PassageJudgement:
    topic_id: str
    doc_id: str
    grade: int

    def __post_init__(self):
        if self.grade not in GRADES:
            raise ValueError(f"grade must be 0, 1 or 2, got {self.grade!r}")


@dataclass(frozen=True)
class DocJudgement:
    topic_id: str
    doc_id: str
    grade: int


def parse_qrels(stream: Iterable[str], source="<qrels>") -> list[PassageJudgement]:
    """Read ``topic_id<TAB>doc_id<TAB>grade`` lines; ``#`` starts a comment line."""
    out = []
    for no, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3 or not fields[0] or not fields[1]:
            raise FormatError("expected topic_id<TAB>doc_id<TAB>grade", source, no)
        try:
            grade = int(fields[2])
        except ValueError:
            raise FormatError(f"grade {fields[2]!r} is not an integer", source, no) from None
        if grade not in GRADES:
            raise FormatError(f"grade {grade} outside 0..2", source, no)
        out.append(PassageJudgement(fields[0], fields[1], grade))
    return out


def read_qrels(path) -> list[PassageJudgement]:
    with open(path, encoding="utf-8") as fh:
        return parse_qrels(fh, source=str(path))


def aggregate_judgements(passages: Iterable[PassageJudgement]) -> list[DocJudgement]:
    """One judgement per (topic, doc): the highest grade of any of its passages."""
    best: dict[tuple[str, str], int] = {}
    for p in passages:
        if p.grade not in GRADES:
            raise MeshRelError(f"grade {p.grade!r} outside 0..2")
        key = (p.topic_id, p.doc_id)
        best[key] = max(best.get(key, p.grade), p.grade)
    return [DocJudgement(t, d, g) for (t, d), g in sorted(best.items())]


def restrict_to_corpus(judgements: Sequence[DocJudgement], corpus: Corpus,
                       drop_missing: bool = False) -> list[DocJudgement]:
    missing = sorted({j.doc_id for j in judgements if j.doc_id not in corpus})
    if missing and not drop_missing:
        raise MeshRelError(
            f"{len(missing)} judged documents are not in the corpus, e.g. {missing[:3]}")
    if missing:
        logger.warning("dropping %d judged documents absent from the corpus", len(missing))
    return [j for j in judgements if j.doc_id in corpus]


@dataclass(frozen=True)
class TopicSet:
    topics: dict[str, tuple[DocJudgement, ...]]
    excluded: tuple[str, ...] = ()

    @cached_property
    def _by_grade(self) -> dict[tuple[str, int], list[str]]:
        out = {(t, g): [] for t in self.topics for g in GRADES}
        for topic, docs in self.topics.items():
            for j in docs:
                out[(topic, j.grade)].append(j.doc_id)
        return {k: sorted(v) for k, v in out.items()}

    def docs(self, topic_id: str, grade: int) -> list[str]:
        return list(self._by_grade[(topic_id, grade)])


def filter_topics(judgements: Iterable[DocJudgement], threshold: float = 0.10) -> TopicSet:
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    by_topic: dict[str, list[DocJudgement]] = defaultdict(list)
    for j in judgements:
        by_topic[j.topic_id].append(j)
    kept, dropped = {}, []
    for topic in sorted(by_topic):
        docs = by_topic[topic]
        positive = sum(1 for j in docs if j.grade > NOT_RELEVANT)
        if positive / len(docs) >= threshold:
            kept[topic] = tuple(sorted(docs, key=lambda j: j.doc_id))
        else:
            dropped.append(topic)
    return TopicSet(kept, tuple(dropped))


@dataclass(frozen=True)
class Pair:
    topic_id: str
    a: str
    b: str


@dataclass(frozen=True)
class PairGroups:
    rr: tuple[Pair, ...]
    nrr: tuple[Pair, ...]
    # (topic, relevant docs, not-relevant docs) the pairs were enumerated from
    blocks: tuple[tuple[str, tuple[str, ...], tuple[str, ...]], ...] = ()


def enumerate_pairs(topics: TopicSet) -> PairGroups:
    """Same-topic pairs: both relevant (``rr``) or relevant with not relevant
    (``nrr``, stored relevant first). Pooled over topics in topic order."""
    rr, nrr, blocks = [], [], []
    for topic in topics.topics:
        rel = topics.docs(topic, RELEVANT)
        non = topics.docs(topic, NOT_RELEVANT)
        rr.extend(Pair(topic, a, b) for a, b in combinations(rel, 2))
        nrr.extend(Pair(topic, a, b) for a in rel for b in non)
        blocks.append((topic, tuple(rel), tuple(non)))
    return PairGroups(tuple(rr), tuple(nrr), tuple(blocks))


def cliffs_delta(x: Sequence[float], y: Sequence[float]) -> float:
    """Cliff's delta: (#{x_i > y_j} - #{x_i < y_j}) / (m n), in O((m+n) log n)."""
    xs = np.asarray(x, dtype=float)
    ys = np.sort(np.asarray(y, dtype=float))
    m, n = xs.size, ys.size
    if not m or not n:
        raise ValueError("cliffs_delta needs two non-empty samples")
    if np.isnan(xs).any() or np.isnan(ys).any():
        raise ValueError("cliffs_delta got NaN")
    # for each x: ys below it, and ys above it
    greater = int(np.searchsorted(ys, xs, side="left").sum())
    less = int((n - np.searchsorted(ys, xs, side="right")).sum())
    return (greater - less) / (m * n)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def precision_recall_mcc(cm: ConfusionMatrix) -> tuple[float, float, float]:
    """Precision, recall and Matthews correlation. A zero denominator gives 0."""
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else 0.0
    denom = (cm.tp + cm.fp) * (cm.tp + cm.fn) * (cm.tn + cm.fp) * (cm.tn + cm.fn)
    mcc = (cm.tp * cm.tn - cm.fp * cm.fn) / math.sqrt(denom) if denom else 0.0
    return precision, recall, mcc


class ScoreTable:
    """Per-topic score matrices for one measure over the topic's grade-0/2 docs.

    Matrices hold oriented scores (distances negated), so larger is always
    more related.
    """

    def __init__(self, spec: MeasureSpec, topics: TopicSet, bundle, threads: int = 1):
        self.spec = spec
        self._pos: dict[str, dict[str, int]] = {}
        self._mat: dict[str, np.ndarray] = {}
        work = []
        for topic in topics.topics:
            docs = sorted(topics.docs(topic, RELEVANT) + topics.docs(topic, NOT_RELEVANT))
            self._pos[topic] = {d: i for i, d in enumerate(docs)}
            work.append((topic, docs))

        def build(item):
            topic, docs = item
            try:
                records = [bundle.corpus[d] for d in docs]
            except KeyError as exc:
                raise MeshRelError(f"document {exc.args[0]!r} is not in the corpus") from None
            mat = score_matrix(spec, records, bundle)
            return -mat if spec.orientation is Orientation.DISTANCE else mat

        if threads > 1 and len(work) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                mats = list(pool.map(build, work))
        else:
            mats = [build(item) for item in work]
        for (topic, _), mat in zip(work, mats):
            self._mat[topic] = mat

    def index(self, topic: str, docs: Sequence[str]) -> np.ndarray:
        pos = self._pos[topic]
        return np.array([pos[d] for d in docs], dtype=np.intp)

    def matrix(self, topic: str) -> np.ndarray:
        return self._mat[topic]

    def oriented(self, pairs: Sequence[Pair]) -> np.ndarray:
        out = np.empty(len(pairs))
        start = 0
        # pairs arrive grouped by topic; score each run with one fancy index
        while start < len(pairs):
            topic = pairs[start].topic_id
            stop = start
            while stop < len(pairs) and pairs[stop].topic_id == topic:
                stop += 1
            pos = self._pos[topic]
            ia = [pos[p.a] for p in pairs[start:stop]]
            ib = [pos[p.b] for p in pairs[start:stop]]
            out[start:stop] = self._mat[topic][ia, ib]
            start = stop
        return out

    def group_values(self, pairs: PairGroups) -> tuple[np.ndarray, np.ndarray]:
        """Oriented rr and nrr scores, in the order of ``pairs.rr`` and ``pairs.nrr``."""
        if not pairs.blocks and (pairs.rr or pairs.nrr):
            return self.oriented(pairs.rr), self.oriented(pairs.nrr)
        rr, nrr = [], []
        for topic, rel, non in pairs.blocks:
            mat = self._mat[topic]
            ri, ni = self.index(topic, rel), self.index(topic, non)
            upper = np.triu_indices(len(ri), k=1)
            rr.append(mat[np.ix_(ri, ri)][upper])
            nrr.append(mat[np.ix_(ri, ni)].ravel())
        return np.concatenate(rr or [np.empty(0)]), np.concatenate(nrr or [np.empty(0)])


@dataclass(frozen=True)
class Test1Result:
    mean_nrr: float
    mean_rr: float
    delta: float
    n_nrr: int
    n_rr: int


def raw_scores(values, spec) -> np.ndarray:
    """Undo the orientation of ScoreTable values."""
    values = np.asarray(values, dtype=float)
    return values if spec.orientation is Orientation.SIMILARITY else -values


def _pair_scores(spec, pairs, source):
    if isinstance(source, ScoreTable):
        return source.oriented(pairs)
    try:
        return np.array([compute(spec, source.corpus[p.a], source.corpus[p.b], source).oriented
                         for p in pairs])
    except KeyError as exc:
        raise MeshRelError(f"document {exc.args[0]!r} is not in the corpus") from None


def run_test1(spec: MeasureSpec, pairs: PairGroups, source) -> Test1Result:
    """Cliff's delta of rr against nrr scores; positive means rr pairs are more related.

    ``source`` is a ScoreTable for ``spec`` or an index bundle to score pairs
    one by one.
    """
    if isinstance(source, ScoreTable):
        rr, nrr = source.group_values(pairs)
    else:
        rr = _pair_scores(spec, pairs.rr, source)
        nrr = _pair_scores(spec, pairs.nrr, source)
    if not len(rr) or not len(nrr):
        raise MeshRelError("test 1 needs at least one rr and one nrr pair")
    delta = cliffs_delta(rr, nrr)
    mean_nrr = math.fsum(raw_scores(nrr, spec)) / len(nrr)
    mean_rr = math.fsum(raw_scores(rr, spec)) / len(rr)
    return Test1Result(mean_nrr, mean_rr, delta, len(nrr), len(rr))


def sample_seed(seed: int, topic_id: str, iteration: int) -> int:
    """Seed of the sampling stream for one (topic, iteration) cell."""
    digest = hashlib.sha256(f"{seed}\x1f{topic_id}\x1f{iteration}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def draw_samples(topics: TopicSet, topic: str, seed: int, iteration: int,
                 sample_size: int) -> tuple[list[str], list[str]]:
    rng = random.Random(sample_seed(seed, topic, iteration))
    rel = rng.sample(topics.docs(topic, RELEVANT), sample_size)
    non = rng.sample(topics.docs(topic, NOT_RELEVANT), sample_size)
    return rel, non


def eligible_topics(topics: TopicSet, sample_size: int) -> list[str]:
    out = []
    for topic in topics.topics:
        n_rel = len(topics.docs(topic, RELEVANT))
        n_non = len(topics.docs(topic, NOT_RELEVANT))
        if n_rel < sample_size or n_non < sample_size:
            logger.warning("topic %s skipped in test 2: %d relevant, %d not relevant, need %d each",
                           topic, n_rel, n_non, sample_size)
        else:
            out.append(topic)
    return out


def run_test2(spec: MeasureSpec, topics: TopicSet, source, seed: int, iterations: int = 30,
              sample_size: int = 10) -> ConfusionMatrix:
    """Pooled confusion matrix of the sampled nearest-neighbour classifier.

    A publication is predicted relevant only when its best relevant-sample
    score strictly beats its best not-relevant-sample score; ties predict not
    relevant.
    """
    if iterations < 1 or sample_size < 1:
        raise ValueError("iterations and sample_size must be positive")
    usable = eligible_topics(topics, sample_size)
    if not usable:
        raise MeshRelError("no topic has enough judged documents for test 2")
    table = source if isinstance(source, ScoreTable) else ScoreTable(spec, topics, source)
    cm = ConfusionMatrix()
    for topic in usable:
        mat = table.matrix(topic)
        rel_all = topics.docs(topic, RELEVANT)
        non_all = topics.docs(topic, NOT_RELEVANT)
        for it in range(iterations):
            r_sample, nr_sample = draw_samples(topics, topic, seed, it, sample_size)
            taken = set(r_sample) | set(nr_sample)
            rest_rel = [d for d in rel_all if d not in taken]
            rest_non = [d for d in non_all if d not in taken]
            r_idx = table.index(topic, r_sample)
            nr_idx = table.index(topic, nr_sample)

            def predicted_relevant(docs):
                if not docs:
                    return 0
                rows = mat[table.index(topic, docs)]
                best_r = rows[:, r_idx].max(axis=1)
                best_nr = rows[:, nr_idx].max(axis=1)
                return int(np.count_nonzero(best_r > best_nr))

            pos_in_rel = predicted_relevant(rest_rel)
            pos_in_non = predicted_relevant(rest_non)
            cm = cm + ConfusionMatrix(tp=pos_in_rel, fn=len(rest_rel) - pos_in_rel,
                                      fp=pos_in_non, tn=len(rest_non) - pos_in_non)
    return cm


@dataclass(frozen=True)
class Histogram:
    edges: tuple[float, ...]
    counts: tuple[int, ...]
    densities: tuple[float, ...]
    underflow: int
    overflow: int


def density_histogram(values: Iterable[float], bin_count: int, lo: float, hi: float) -> Histogram:
    """Uniform bins over [lo, hi]; values outside go to under/overflow counters.

    Density is count / (total * bin width) with the total counting every value,
    so in-range mass plus the out-of-range share sums to one.
    """
    if bin_count < 1:
        raise ValueError("bin_count must be at least 1")
    if not lo < hi:
        raise ValueError(f"invalid range [{lo}, {hi}]")
    values = np.asarray(list(values), dtype=float)
    counts = np.zeros(bin_count, dtype=np.int64)
    under = int(np.count_nonzero(values < lo))
    over = int(np.count_nonzero(values > hi))
    inside = values[(values >= lo) & (values <= hi)]
    width = (hi - lo) / bin_count
    if inside.size:
        idx = np.minimum(((inside - lo) / width).astype(np.int64), bin_count - 1)
        counts = np.bincount(idx, minlength=bin_count)
    total = values.size
    dens = counts / (total * width) if total else np.zeros(bin_count)
    edges = tuple(lo + i * width for i in range(bin_count)) + (hi,)
    return Histogram(edges, tuple(int(c) for c in counts), tuple(float(d) for d in dens), under, over)


@dataclass
class MeasureResult:
    measure: str
    orientation: str
    test1: Test1Result
    confusion: ConfusionMatrix
    precision: float
    recall: float
    mcc: float
    histogram: Histogram


@dataclass
class BenchmarkReport:
    rows: list[MeasureResult]
    seed: int
    config: dict = field(default_factory=dict)
    topics: tuple[str, ...] = ()
    excluded_topics: tuple[str, ...] = ()


def run_benchmark(measures: Sequence[MeasureSpec], bundle, judgements: Sequence[DocJudgement],
                  seed: int, *, iterations: int = 30, sample_size: int = 10,
                  topic_threshold: float = 0.10, bins: int = 50,
                  ranges: dict | None = None, threads: int = 1,
                  config: dict | None = None) -> BenchmarkReport:
    """Both tests plus score histograms for every measure, in the given order."""
    topics = filter_topics(judgements, topic_threshold)
    if not topics.topics:
        raise MeshRelError("no topic passes the relevance threshold")
    pairs = enumerate_pairs(topics)
    ranges = {**DEFAULT_RANGES, **(ranges or {})}
    rows = []
    for spec in measures:
        logger.info("scoring %s", spec.label)
        table = ScoreTable(spec, topics, bundle, threads=threads)
        t1 = run_test1(spec, pairs, table)
        cm = run_test2(spec, topics, table, seed, iterations, sample_size)
        precision, recall, mcc = precision_recall_mcc(cm)
        rr_values, nrr_values = table.group_values(pairs)
        raw = raw_scores(np.concatenate([nrr_values, rr_values]), spec)
        lo, hi = ranges[spec.orientation]
        hist = density_histogram(raw, bins, lo, hi)
        rows.append(MeasureResult(spec.label, spec.orientation.value, t1, cm,
                                  precision, recall, mcc, hist))
    return BenchmarkReport(rows, seed, dict(config or {}), tuple(topics.topics), topics.excluded)


REPORT_COLUMNS = ("measure", "mean_nrr", "mean_rr", "cliffs_d", "tp", "fp", "tn", "fn",
                  "precision", "recall", "mcc")


def format_report(report: BenchmarkReport) -> str:
    lines = ["\t".join(REPORT_COLUMNS)]
    for r in report.rows:
        cm = r.confusion
        lines.append("\t".join([
            r.measure, f"{r.test1.mean_nrr:.6f}", f"{r.test1.mean_rr:.6f}", f"{r.test1.delta:.6f}",
            str(cm.tp), str(cm.fp), str(cm.tn), str(cm.fn),
            f"{r.precision:.6f}", f"{r.recall:.6f}", f"{r.mcc:.6f}",
        ]))
    return "\n".join(lines) + "\n"


def report_to_dict(report: BenchmarkReport) -> dict:
    return {
        "seed": report.seed,
        "config": report.config,
        "topics": list(report.topics),
        "excluded_topics": list(report.excluded_topics),
        "measures": [
            {
                "measure": r.measure,
                "orientation": r.orientation,
                "mean_nrr": r.test1.mean_nrr,
                "mean_rr": r.test1.mean_rr,
                "cliffs_d": r.test1.delta,
                "n_nrr": r.test1.n_nrr,
                "n_rr": r.test1.n_rr,
                "tp": r.confusion.tp,
                "fp": r.confusion.fp,
                "tn": r.confusion.tn,
                "fn": r.confusion.fn,
                "precision": r.precision,
                "recall": r.recall,
                "mcc": r.mcc,
                "histogram_underflow": r.histogram.underflow,
                "histogram_overflow": r.histogram.overflow,
            }
            for r in report.rows
        ],
    }


def format_histograms(rows: Iterable[tuple[str, Histogram]]) -> str:
    lines = ["measure\tbin_lo\tbin_hi\tcount\tdensity"]
    for label, h in rows:
        for i, count in enumerate(h.counts):
            lines.append(f"{label}\t{h.edges[i]!r}\t{h.edges[i + 1]!r}\t{count}\t{h.densities[i]!r}")
    return "\n".join(lines) + "\n"
