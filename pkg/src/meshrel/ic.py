"""Per-term information content from corpus document frequencies.

A term's mass is its own document frequency plus that of every descendant
(each descendant counted once, even when reachable along several tree
numbers). IC is the negative log of the mass share::

    ic(t) = -log(mass(t) / Z),   Z = sum of raw masses over the term universe

Unused terms would have mass 0 and infinite IC, so the numerator mass is
floored at 1. Z is summed over raw (unfloored) masses so the floor never
moves the IC of observed terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .vocab import Corpus, VocabularyIndex

UNIVERSES = ("all", "observed")


@dataclass(frozen=True)
class FrequencyTable:
    counts: Mapping[str, int]


@dataclass(frozen=True)
class IcTable:
    ic: Mapping[str, float]
    subtree_mass: Mapping[str, int]
    log_base: float = math.e
    universe: str = "all"

    def __getitem__(self, term_id) -> float:
        return self.ic[term_id]

    def __contains__(self, term_id):
        return term_id in self.ic


def term_frequencies(corpus: Corpus, vocab: VocabularyIndex) -> FrequencyTable:
    """Number of publications indexed with each term (0 for unused terms)."""
    counts = dict.fromkeys(vocab.terms, 0)
    for rec in corpus:
        for tid in rec.term_ids:
            counts[tid] += 1
    return FrequencyTable(counts)


def raw_masses(vocab: VocabularyIndex, freqs: FrequencyTable) -> dict[str, int]:
    closure = vocab.descendant_closure
    counts = freqs.counts
    return {t: counts[t] + sum(counts[d] for d in closure[t]) for t in vocab.terms}


def compute_ic(vocab: VocabularyIndex, freqs: FrequencyTable, *,
               log_base: float = math.e, universe: str = "all") -> IcTable:
    """Information content of every vocabulary term.

    Args:
        log_base: base of the logarithm; natural log by default.
        universe: ``"all"`` sums the normaliser over every vocabulary term,
            ``"observed"`` only over terms with nonzero frequency.
    """
    if universe not in UNIVERSES:
        raise ValueError(f"universe must be one of {UNIVERSES}, got {universe!r}")
    if not log_base > 1:
        raise ValueError(f"log base must exceed 1, got {log_base}")
    raw = raw_masses(vocab, freqs)
    if universe == "all":
        z = sum(raw.values())
    else:
        z = sum(m for t, m in raw.items() if freqs.counts[t] > 0)
    z = z or 1
    scale = 1.0 if log_base == math.e else math.log(log_base)

    ic = {}
    mass = {}
    for t, m in raw.items():
        m = max(m, 1)
        mass[t] = m
        value = -math.log(m / z)
        if scale != 1.0:
            value /= scale
        # also turns -log(1) == -0.0 into a plain 0.0
        ic[t] = value if value > 0.0 else 0.0
    return IcTable(ic, mass, log_base, universe)


def format_ic(ic: IcTable, freqs: FrequencyTable) -> str:
    """Dump as ``term_id<TAB>frequency<TAB>subtree_mass<TAB>ic`` sorted by term id."""
    return "".join(
        f"{t}\t{freqs.counts[t]}\t{ic.subtree_mass[t]}\t{ic.ic[t]!r}\n"
        for t in sorted(ic.ic)
    )
