"""Seeded synthetic vocabularies, corpora and relevance judgements.

Useful for smoke-testing the benchmark end to end without licensed data. The
default topic sizes (not relevant, possibly relevant, relevant) follow the
shape of a real nine-topic genomics judgement set.
"""

from __future__ import annotations

import random
from collections import deque

from .benchmark import PassageJudgement
from .vocab import (Corpus, MeshTerm, PublicationRecord, TermAnnotation, TreeNumber,
                    VocabularyIndex, build_vocabulary)

DEFAULT_TOPIC_SIZES = {
    "181": (122, 38, 182),
    "160": (125, 60, 138),
    "186": (230, 29, 163),
    "172": (356, 27, 207),
    "163": (269, 94, 72),
    "182": (411, 31, 44),
    "167": (360, 9, 47),
    "168": (280, 21, 22),
    "169": (422, 20, 44),
}
# share of a document's terms drawn near its topic's focus terms, by grade
TOPICALITY = {0: 0.3, 1: 0.45, 2: 0.6}


def make_vocabulary(n_terms: int = 400, n_roots: int = 4, extra_position_rate: float = 0.1,
                    rng: random.Random | None = None) -> VocabularyIndex:
    """Random hierarchy; some terms get a second tree number under another parent."""
    rng = rng or random.Random(0)
    if n_terms < n_roots or n_roots < 1:
        raise ValueError("need at least one root and n_terms >= n_roots")
    positions: list[TreeNumber] = []
    child_count: dict[TreeNumber, int] = {}
    trees: dict[str, list[TreeNumber]] = {}

    def new_position(parent):
        child_count[parent] = child_count.get(parent, 0) + 1
        tn = TreeNumber(parent.segments + (f"{child_count[parent]:03d}",))
        positions.append(tn)
        return tn

    for i in range(n_roots):
        tid = f"T{i:04d}"
        tn = TreeNumber((chr(ord("A") + i % 26) + str(i // 26 or ""),))
        positions.append(tn)
        trees[tid] = [tn]
    for i in range(n_roots, n_terms):
        tid = f"T{i:04d}"
        # prefer shallow parents so the hierarchy stays bushy
        parent = min(rng.sample(positions, min(3, len(positions))), key=lambda t: t.depth)
        tns = [new_position(parent)]
        if rng.random() < extra_position_rate:
            other = rng.choice(positions[:-1])
            if other != parent:
                tns.append(new_position(other))
        trees[tid] = tns
    terms = [MeshTerm(tid, f"term {tid[1:]}", frozenset(tns)) for tid, tns in trees.items()]
    return build_vocabulary(terms)


def make_corpus(vocab: VocabularyIndex, n_docs: int, rng: random.Random | None = None,
                *, prefix: str = "p", terms_per_doc: tuple[int, int] = (1, 8),
                qualifiers: int = 5) -> Corpus:
    """Small random corpus over ``vocab`` with random major flags and qualifiers."""
    rng = rng or random.Random(0)
    ids = list(vocab.terms)
    quals = [f"q{i}" for i in range(qualifiers)]
    records = {}
    for i in range(n_docs):
        k = rng.randint(*terms_per_doc)
        chosen = rng.sample(ids, min(k, len(ids)))
        anns = [TermAnnotation(t, rng.random() < 0.35,
                               frozenset(rng.sample(quals, rng.randint(0, 2))) if quals else frozenset())
                for t in chosen]
        doc = f"{prefix}{i}"
        records[doc] = PublicationRecord.of(doc, anns)
    return Corpus(records)


def _neighbourhood(vocab: VocabularyIndex, start: str, radius: int) -> list[str]:
    seen = {start: 0}
    queue = deque([start])
    while queue:
        t = queue.popleft()
        if seen[t] == radius:
            continue
        for n in sorted(vocab.parents[t] | vocab.children[t]):
            if n not in seen:
                seen[n] = seen[t] + 1
                queue.append(n)
    return sorted(seen)


def make_dataset(seed: int = 0, topic_sizes: dict | None = None, *, n_terms: int = 400,
                 background_docs: int = 1000, terms_per_doc: tuple[int, int] = (6, 14),
                 n_qualifiers: int = 20):
    """Vocabulary, corpus and passage judgements with topical structure.

    Returns ``(vocab, corpus, passages)``. Relevant documents draw more of their
    terms from around their topic's focus terms than not-relevant ones, so the
    measures have a signal to find.
    """
    rng = random.Random(seed)
    topic_sizes = DEFAULT_TOPIC_SIZES if topic_sizes is None else topic_sizes
    vocab = make_vocabulary(n_terms, rng=rng)
    ids = list(vocab.terms)
    # skewed popularity so IC spreads out
    popularity = [1.0 / (1 + i) ** 0.8 for i in range(len(ids))]
    rng.shuffle(popularity)
    quals = [f"q{i:02d}" for i in range(n_qualifiers)]

    def annotate(terms):
        majors = set(rng.sample(terms, min(len(terms), rng.randint(1, 4))))
        return [TermAnnotation(t, t in majors,
                               frozenset(rng.sample(quals, rng.randint(1, 2)))
                               if rng.random() < 0.9 else frozenset())
                for t in terms]

    def draw(k, near, share):
        picked = set()
        while len(picked) < k:
            if near and rng.random() < share:
                picked.add(rng.choice(near))
            else:
                picked.add(rng.choices(ids, weights=popularity)[0])
        return sorted(picked)

    records = {}
    passages = []
    counter = 0
    for topic, sizes in topic_sizes.items():
        focus = rng.sample([t for t in ids if t not in vocab.roots], 3)
        near = sorted({n for f in focus for n in _neighbourhood(vocab, f, 2)})
        for grade, count in enumerate(sizes):
            for _ in range(count):
                counter += 1
                doc = f"d{counter:06d}"
                terms = draw(rng.randint(*terms_per_doc), near, TOPICALITY[grade])
                records[doc] = PublicationRecord.of(doc, annotate(terms))
                passages.append(PassageJudgement(topic, doc, grade))
                for _ in range(rng.randint(0, 2)):
                    passages.append(PassageJudgement(topic, doc, rng.randint(0, grade)))
    for _ in range(background_docs):
        counter += 1
        doc = f"d{counter:06d}"
        records[doc] = PublicationRecord.of(doc, annotate(draw(rng.randint(*terms_per_doc), [], 0)))
    rng.shuffle(passages)
    return vocab, Corpus(records), passages


def format_passages(passages) -> str:
    return "".join(f"{p.topic_id}\t{p.doc_id}\t{p.grade}\n" for p in passages)
