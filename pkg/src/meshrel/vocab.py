"""Controlled vocabulary and publication corpus: parsing, validation, indexing.

Vocabulary file, one term per line::

    id<TAB>name<TAB>tree_number(;tree_number)*

Corpus file, one publication per line::

    doc_id<TAB>term_entry(;term_entry)*
    term_entry = term_id[*][/qualifier(,qualifier)*]

A trailing ``*`` on the term id marks a major term. Lines starting with ``#``
are comments; blank lines are ignored. The hierarchy is derived only from
tree-number prefixes: ``C14.280`` is the parent position of ``C14.280.383``.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

from .errors import FormatError, UnknownTermError, VocabularyError

TREE_SEP = "."
_SEGMENT_RE = re.compile(r"^[A-Za-z0-9]+$")
_FORBIDDEN_IN_TOKEN = set("\t;,/*")


@dataclass(frozen=True, order=True)
class TreeNumber:
    segments: tuple[str, ...]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("tree number needs at least one segment")
        for seg in self.segments:
            if not _SEGMENT_RE.match(seg):
                raise ValueError(f"bad tree number segment {seg!r}")

    @classmethod
    def parse(cls, text: str) -> "TreeNumber":
        return cls(tuple(text.split(TREE_SEP)))

    @property
    def parent(self) -> "TreeNumber | None":
        if len(self.segments) == 1:
            return None
        return TreeNumber(self.segments[:-1])

    @property
    def depth(self) -> int:
        return len(self.segments)

    def __str__(self):
        return TREE_SEP.join(self.segments)


@dataclass(frozen=True)
class MeshTerm:
    id: str
    name: str
    tree_numbers: frozenset[TreeNumber]


@dataclass(frozen=True)
class VocabularyIndex:
    """Immutable term table plus the parent/child relation derived from tree numbers."""

    terms: Mapping[str, MeshTerm]
    parents: Mapping[str, frozenset[str]]
    children: Mapping[str, frozenset[str]]
    roots: frozenset[str]
    # topological order, parents before children
    order: tuple[str, ...] = field(compare=False, repr=False)

    def __contains__(self, term_id):
        return term_id in self.terms

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def require(self, term_id: str) -> MeshTerm:
        try:
            return self.terms[term_id]
        except KeyError:
            raise UnknownTermError(f"unknown term id {term_id!r}") from None

    def find(self, key: str) -> str:
        """Resolve a term by id, falling back to an exact name match."""
        if key in self.terms:
            return key
        for term in self.terms.values():
            if term.name == key:
                return term.id
        raise UnknownTermError(f"no term with id or name {key!r}")

    @cached_property
    def descendant_closure(self) -> dict[str, frozenset[str]]:
        """Descendant sets for every term, built bottom-up in one pass."""
        closure: dict[str, frozenset[str]] = {}
        for tid in reversed(self.order):
            acc = set()
            for c in self.children[tid]:
                acc.add(c)
                acc |= closure[c]
            closure[tid] = frozenset(acc)
        return closure


def descendants_of(vocab: VocabularyIndex, term_id: str) -> frozenset[str]:
    """All direct and indirect descendants of ``term_id``, excluding itself."""
    vocab.require(term_id)
    seen: set[str] = set()
    queue = deque(vocab.children[term_id])
    while queue:
        t = queue.popleft()
        if t in seen:
            continue
        seen.add(t)
        queue.extend(vocab.children[t])
    return frozenset(seen)


def build_vocabulary(terms: Iterable[MeshTerm], *, source="<input>",
                     line_of: Mapping[str, int] | None = None) -> VocabularyIndex:
    """Validate terms and derive parents, children, roots.

    Raises VocabularyError (or FormatError when line numbers are known) on a
    duplicate id, a tree number owned by two terms, a tree number whose parent
    position is not owned by any term, or a cycle.
    """
    line_of = line_of or {}

    def fail(msg, tid):
        if tid in line_of:
            raise FormatError(msg, source, line_of[tid])
        raise VocabularyError(msg)

    table: dict[str, MeshTerm] = {}
    owner: dict[TreeNumber, str] = {}
    for term in terms:
        if term.id in table:
            fail(f"duplicate term id {term.id!r}", term.id)
        if not term.tree_numbers:
            fail(f"term {term.id!r} has no tree numbers", term.id)
        for tn in term.tree_numbers:
            if tn in owner:
                fail(f"tree number {tn} of {term.id!r} already belongs to {owner[tn]!r}", term.id)
            owner[tn] = term.id
        table[term.id] = term

    parents: dict[str, set[str]] = {tid: set() for tid in table}
    children: dict[str, set[str]] = {tid: set() for tid in table}
    roots = set()
    for tid, term in table.items():
        for tn in term.tree_numbers:
            up = tn.parent
            if up is None:
                roots.add(tid)
                continue
            if up not in owner:
                fail(f"tree number {tn} of {tid!r} has no parent term at {up}", tid)
            p = owner[up]
            if p == tid:
                fail(f"term {tid!r} is its own parent via {tn}", tid)
            parents[tid].add(p)
            children[p].add(tid)

    # Kahn's algorithm; leftovers sit on a cycle
    indeg = {tid: len(ps) for tid, ps in parents.items()}
    ready = deque(tid for tid in table if indeg[tid] == 0)
    order = []
    while ready:
        tid = ready.popleft()
        order.append(tid)
        for c in sorted(children[tid]):
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    if len(order) != len(table):
        stuck = sorted(tid for tid in table if indeg[tid] > 0)
        raise VocabularyError(f"hierarchy has a cycle through {stuck[:5]}")

    return VocabularyIndex(
        terms=table,
        parents={k: frozenset(v) for k, v in parents.items()},
        children={k: frozenset(v) for k, v in children.items()},
        roots=frozenset(roots),
        order=tuple(order),
    )


def _data_lines(stream: Iterable[str]):
    for no, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        yield no, line


def _check_token(text, what, source, no):
    if not text or text != text.strip() or _FORBIDDEN_IN_TOKEN & set(text):
        raise FormatError(f"bad {what} {text!r}", source, no)


def parse_vocabulary(stream: Iterable[str], source="<vocabulary>") -> VocabularyIndex:
    terms = []
    line_of = {}
    for no, line in _data_lines(stream):
        fields = line.split("\t")
        if len(fields) != 3:
            raise FormatError(f"expected 3 tab-separated fields, got {len(fields)}", source, no)
        tid, name, trees = fields
        _check_token(tid, "term id", source, no)
        if not name:
            raise FormatError(f"empty name for {tid!r}", source, no)
        if not trees:
            raise FormatError(f"term {tid!r} has no tree numbers", source, no)
        tns = []
        for text in trees.split(";"):
            try:
                tns.append(TreeNumber.parse(text))
            except ValueError as exc:
                raise FormatError(f"bad tree number {text!r}: {exc}", source, no) from None
        if len(set(tns)) != len(tns):
            raise FormatError(f"duplicate tree number in term {tid!r}", source, no)
        if tid in line_of:
            raise FormatError(f"duplicate term id {tid!r}", source, no)
        line_of[tid] = no
        terms.append(MeshTerm(tid, name, frozenset(tns)))
    return build_vocabulary(terms, source=source, line_of=line_of)


def format_vocabulary(vocab: VocabularyIndex) -> str:
    out = []
    for term in vocab.terms.values():
        trees = ";".join(str(tn) for tn in sorted(term.tree_numbers))
        out.append(f"{term.id}\t{term.name}\t{trees}\n")
    return "".join(out)


def read_vocabulary(path) -> VocabularyIndex:
    with open(path, encoding="utf-8") as fh:
        return parse_vocabulary(fh, source=str(path))


@dataclass(frozen=True)
class TermAnnotation:
    term_id: str
    major: bool = False
    qualifiers: frozenset[str] = frozenset()


@dataclass(frozen=True)
class PublicationRecord:
    """A publication's term annotations, one per term, sorted by term id."""

    doc_id: str
    annotations: tuple[TermAnnotation, ...]

    def __post_init__(self):
        if not self.annotations:
            raise ValueError(f"publication {self.doc_id!r} has no terms")
        ids = [a.term_id for a in self.annotations]
        if len(set(ids)) != len(ids):
            raise ValueError(f"publication {self.doc_id!r} repeats a term")

    @classmethod
    def of(cls, doc_id: str, annotations: Iterable[TermAnnotation]) -> "PublicationRecord":
        return cls(doc_id, tuple(sorted(annotations, key=lambda a: a.term_id)))

    @cached_property
    def term_ids(self) -> tuple[str, ...]:
        return tuple(a.term_id for a in self.annotations)

    @cached_property
    def major_ids(self) -> tuple[str, ...]:
        return tuple(a.term_id for a in self.annotations if a.major)


@dataclass(frozen=True)
class Corpus:
    records: Mapping[str, PublicationRecord]

    def __len__(self):
        return len(self.records)

    def __contains__(self, doc_id):
        return doc_id in self.records

    def __getitem__(self, doc_id) -> PublicationRecord:
        return self.records[doc_id]

    def __iter__(self):
        return iter(self.records.values())


def parse_term_entry(entry: str, source="<corpus>", no=None) -> TermAnnotation:
    tid, slash, quals = entry.partition("/")
    major = tid.endswith("*")
    if major:
        tid = tid[:-1]
    _check_token(tid, "term id", source, no)
    qualifiers = frozenset()
    if slash:
        parts = quals.split(",")
        for q in parts:
            _check_token(q, "qualifier", source, no)
        qualifiers = frozenset(parts)
    return TermAnnotation(tid, major, qualifiers)


def parse_corpus(stream: Iterable[str], vocab: VocabularyIndex, source="<corpus>") -> Corpus:
    records: dict[str, PublicationRecord] = {}
    for no, line in _data_lines(stream):
        doc_id, tab, body = line.partition("\t")
        _check_token(doc_id, "doc id", source, no)
        if not tab or not body:
            raise FormatError(f"publication {doc_id!r} has no terms", source, no)
        if doc_id in records:
            raise FormatError(f"duplicate doc id {doc_id!r}", source, no)
        merged: dict[str, TermAnnotation] = {}
        for entry in body.split(";"):
            ann = parse_term_entry(entry, source, no)
            if ann.term_id not in vocab:
                raise FormatError(
                    f"publication {doc_id!r} references unknown term {ann.term_id!r}", source, no)
            prev = merged.get(ann.term_id)
            if prev is not None:
                ann = TermAnnotation(ann.term_id, prev.major or ann.major,
                                     prev.qualifiers | ann.qualifiers)
            merged[ann.term_id] = ann
        records[doc_id] = PublicationRecord.of(doc_id, merged.values())
    return Corpus(records)


def format_corpus(corpus: Corpus) -> str:
    out = []
    for rec in corpus:
        entries = []
        for a in rec.annotations:
            e = a.term_id + ("*" if a.major else "")
            if a.qualifiers:
                e += "/" + ",".join(sorted(a.qualifiers))
            entries.append(e)
        out.append(f"{rec.doc_id}\t{';'.join(entries)}\n")
    return "".join(out)


def read_corpus(path, vocab: VocabularyIndex) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        return parse_corpus(fh, vocab, source=str(path))
