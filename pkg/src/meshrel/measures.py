"""The ten publication relatedness measures.

Co-occurrence (similarity, higher = more related):

* ``boudreau``: cosine of binary term vectors.
* ``ahlgren``: cosine of vectors holding IC per term (doubled for major
  terms) plus a binary coordinate per (term, qualifier) pair.

Distance (lower = more related), ``dist<w>:<graph>``: each term of one
publication is matched to its nearest term in the other, and the matched
distances are averaged with major terms weighted ``w`` (minor terms 1).
``dist0`` averages over major terms only. ``<graph>`` is ``unit`` or ``dic``
(IC-difference edge lengths).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DisconnectedError, MeshRelError, UnknownTermError
from .graph import DistanceCache, GraphVariant, TermGraph, distance_matrix
from .ic import IcTable
from .vocab import PublicationRecord

ZERO_VECTOR = "zero-vector"
NO_MAJOR_TERMS = "no-major-terms"


class Orientation(enum.Enum):
    SIMILARITY = "similarity"
    DISTANCE = "distance"


class Family(enum.Enum):
    COOCCURRENCE = "cooccurrence"
    DISTANCE = "distance"


@dataclass(frozen=True)
class RelatednessScore:
    value: float
    orientation: Orientation
    flags: frozenset[str] = frozenset()

    @property
    def oriented(self) -> float:
        """The value with sign fixed so that larger always means more related."""
        return self.value if self.orientation is Orientation.SIMILARITY else -self.value


@dataclass(frozen=True)
class MeasureSpec:
    family: Family
    style: str | None = None
    weight: int | None = None
    variant: GraphVariant | None = None

    def __post_init__(self):
        if self.family is Family.COOCCURRENCE:
            ok = self.style in ("boudreau", "ahlgren") and self.weight is None and self.variant is None
        else:
            ok = self.style is None and self.weight in (0, 1, 2, 3) and isinstance(self.variant, GraphVariant)
        if not ok:
            raise ValueError(f"invalid measure {self!r}")

    @classmethod
    def parse(cls, text: str) -> "MeasureSpec":
        text = text.strip().lower()
        if text in ("boudreau", "ahlgren"):
            return cls(Family.COOCCURRENCE, style=text)
        head, sep, graph = text.partition(":")
        if sep and head.startswith("dist") and head[4:] in ("0", "1", "2", "3"):
            try:
                return cls(Family.DISTANCE, weight=int(head[4:]), variant=GraphVariant(graph))
            except ValueError:
                pass
        raise ValueError(f"unknown measure {text!r}; choose from {', '.join(MEASURE_NAMES)}")

    @property
    def label(self) -> str:
        if self.family is Family.COOCCURRENCE:
            return self.style
        return f"dist{self.weight}:{self.variant.value}"

    @property
    def orientation(self) -> Orientation:
        return Orientation.SIMILARITY if self.family is Family.COOCCURRENCE else Orientation.DISTANCE

    def __str__(self):
        return self.label


# report row order: IC-difference distances, unit distances, then co-occurrence
MEASURE_NAMES = (
    "dist1:dic", "dist2:dic", "dist3:dic", "dist0:dic",
    "dist1:unit", "dist2:unit", "dist3:unit", "dist0:unit",
    "ahlgren", "boudreau",
)
ALL_MEASURES = tuple(MeasureSpec.parse(n) for n in MEASURE_NAMES)


def parse_measures(text: str) -> list[MeasureSpec]:
    if text.strip().lower() == "all":
        return list(ALL_MEASURES)
    specs = [MeasureSpec.parse(part) for part in text.split(",") if part.strip()]
    if not specs:
        raise ValueError("no measures selected")
    return list(dict.fromkeys(specs))


def sim_boudreau(p_a: PublicationRecord, p_b: PublicationRecord) -> RelatednessScore:
    ta, tb = set(p_a.term_ids), set(p_b.term_ids)
    value = len(ta & tb) / math.sqrt(len(ta) * len(tb))
    return RelatednessScore(value, Orientation.SIMILARITY)


def ahlgren_vector(p: PublicationRecord, ic: IcTable) -> dict[tuple, float]:
    """Sparse vector keyed ``(term_id,)`` for term and ``(term_id, qualifier)``
    for qualifier coordinates. Zero entries are not stored."""
    vec = {}
    for a in p.annotations:
        try:
            value = ic[a.term_id]
        except KeyError:
            raise UnknownTermError(f"IC table lacks term {a.term_id!r}") from None
        if a.major:
            value *= 2
        if value:
            vec[(a.term_id,)] = value
        for q in a.qualifiers:
            vec[(a.term_id, q)] = 1.0
    return vec


def _sumsq(vec: dict) -> float:
    return math.fsum(x * x for x in vec.values())


def _cosine(va: dict, sa: float, vb: dict, sb: float) -> RelatednessScore:
    if sa == 0.0 or sb == 0.0:
        return RelatednessScore(0.0, Orientation.SIMILARITY, frozenset({ZERO_VECTOR}))
    # fsum is correctly rounded, so the iteration order of the shared keys is irrelevant
    dot = math.fsum(va[k] * vb[k] for k in va.keys() & vb.keys())
    # sqrt(sa * sb) rather than sqrt(sa) * sqrt(sb): exact 1.0 for equal vectors
    value = dot / math.sqrt(sa * sb)
    return RelatednessScore(min(value, 1.0), Orientation.SIMILARITY)


def sim_ahlgren(p_a: PublicationRecord, p_b: PublicationRecord, ic: IcTable) -> RelatednessScore:
    va, vb = ahlgren_vector(p_a, ic), ahlgren_vector(p_b, ic)
    return _cosine(va, _sumsq(va), vb, _sumsq(vb))


def _distance_terms(p: PublicationRecord, w: int) -> tuple[list[str], list[float], bool]:
    """Terms and their weights for weighting ``w``; the flag marks the dist0 fallback."""
    if w == 0:
        majors = list(p.major_ids)
        if majors:
            return majors, [1.0] * len(majors), False
        return list(p.term_ids), [1.0] * len(p.annotations), True
    return list(p.term_ids), [float(w) if a.major else 1.0 for a in p.annotations], False


def _nearest(graph, cache, terms_from, terms_to):
    cols = np.fromiter((graph.vertex(t) for t in terms_to), dtype=np.intp, count=len(terms_to))
    out = []
    for t in terms_from:
        out.append(float(cache.row(graph, graph.vertex(t))[cols].min()))
    if any(math.isinf(d) for d in out):
        raise DisconnectedError("publications have terms in unconnected categories")
    return out


def _side(weights, mins):
    # plain left-to-right accumulation; score_matrix reproduces this order exactly
    acc = 0.0
    for w, d in zip(weights, mins):
        acc = acc + w * d
    return acc


def dist_weighted(p_a: PublicationRecord, p_b: PublicationRecord, graph: TermGraph,
                  cache: DistanceCache, w: int) -> RelatednessScore:
    if w not in (0, 1, 2, 3):
        raise ValueError(f"weighting must be 0, 1, 2 or 3, got {w}")
    ta, wa, fa = _distance_terms(p_a, w)
    tb, wb, fb = _distance_terms(p_b, w)
    side_a = _side(wa, _nearest(graph, cache, ta, tb))
    side_b = _side(wb, _nearest(graph, cache, tb, ta))
    value = (side_a + side_b) / (math.fsum(wa) + math.fsum(wb))
    flags = frozenset({NO_MAJOR_TERMS}) if fa or fb else frozenset()
    return RelatednessScore(value, Orientation.DISTANCE, flags)


def compute(spec: MeasureSpec, p_a: PublicationRecord, p_b: PublicationRecord,
            bundle) -> RelatednessScore:
    """Score one publication pair with any of the ten measures."""
    if spec.family is Family.COOCCURRENCE:
        if spec.style == "boudreau":
            return sim_boudreau(p_a, p_b)
        if getattr(bundle, "ic", None) is None:
            raise MeshRelError("ahlgren needs an IC table")
        return sim_ahlgren(p_a, p_b, bundle.ic)
    return dist_weighted(p_a, p_b, bundle.graph(spec.variant), bundle.cache(spec.variant),
                         spec.weight)


def score_matrix(spec: MeasureSpec, records: Sequence[PublicationRecord], bundle) -> np.ndarray:
    """Symmetric matrix of raw scores between all ``records``.

    Entry ``[i, j]`` is bit-identical to ``compute(spec, records[i], records[j],
    bundle).value``.
    """
    n = len(records)
    if n == 0:
        return np.zeros((0, 0))
    if spec.family is Family.DISTANCE:
        return _dist_matrix(records, bundle.graph(spec.variant), bundle.cache(spec.variant),
                            spec.weight)
    if spec.style == "boudreau":
        incidence = _incidence([r.term_ids for r in records])
        # 0/1 products sum to small integers, which float matmul gets exactly
        overlap = incidence @ incidence.T
        sizes = np.array([len(r.annotations) for r in records], dtype=np.int64)
        return overlap / np.sqrt(sizes[:, None] * sizes[None, :])
    vecs = [ahlgren_vector(r, bundle.ic) for r in records]
    sums = [_sumsq(v) for v in vecs]
    incidence = _incidence([list(v) for v in vecs])
    touching = (incidence @ incidence.T) > 0
    out = np.zeros((n, n))
    for i, j in zip(*np.nonzero(np.triu(touching))):
        out[i, j] = out[j, i] = _cosine(vecs[i], sums[i], vecs[j], sums[j]).value
    return out


def _incidence(key_lists) -> np.ndarray:
    columns = {}
    for keys in key_lists:
        for k in keys:
            columns.setdefault(k, len(columns))
    mat = np.zeros((len(key_lists), len(columns)))
    for i, keys in enumerate(key_lists):
        mat[i, [columns[k] for k in keys]] = 1.0
    return mat


def _dist_matrix(records, graph, cache, w):
    lists = [_distance_terms(r, w) for r in records]
    vocab = sorted({t for terms, _, _ in lists for t in terms})
    pos = {t: i for i, t in enumerate(vocab)}
    dmat = distance_matrix(graph, cache, vocab, allow_inf=True)

    lengths = np.array([len(terms) for terms, _, _ in lists])
    offsets = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    concat = np.array([pos[t] for terms, _, _ in lists for t in terms], dtype=np.intp)
    # nearest[u, b]: distance from vocab term u to the closest term of record b
    nearest = np.minimum.reduceat(dmat[:, concat], offsets, axis=1)

    n, width = len(records), int(lengths.max())
    term_at = np.zeros((n, width), dtype=np.intp)
    weight_at = np.zeros((n, width))
    for i, (terms, weights, _) in enumerate(lists):
        term_at[i, :len(terms)] = [pos[t] for t in terms]
        weight_at[i, :len(terms)] = weights
    present = np.arange(width)[None, :] < lengths[:, None]
    # side[a, b] accumulates term by term in record order, matching _side
    side = np.zeros((n, n))
    for j in range(width):
        step = weight_at[:, j, None] * nearest[term_at[:, j]]
        side = side + np.where(present[:, j, None], step, 0.0)
    if not np.isfinite(side).all():
        raise DisconnectedError("publications have terms in unconnected categories")
    totals = np.array([math.fsum(weights) for _, weights, _ in lists])
    return (side + side.T) / (totals[:, None] + totals[None, :])
