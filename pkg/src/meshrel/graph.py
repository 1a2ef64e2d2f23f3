"""Term networks and shortest-path term distance.

Two variants over the same undirected parent-child edge set:

* ``UNIT``: every edge has length 1.
* ``DELTA_IC``: an edge has length ``|ic(parent) - ic(child)|``.

Top-level terms are joined through a virtual root (IC 0) so that terms in
different top-level categories are still connected.

Path lengths are accumulated in exact integer arithmetic: every edge weight is
a float, i.e. a dyadic rational, so scaling all weights by a common power of
two gives integers. A distance is rounded to float exactly once, which makes
``d(a, b)`` bit-identical to ``d(b, a)`` and independent of which endpoint the
search started from.
"""

from __future__ import annotations

import enum
import heapq
import math
import threading
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import DisconnectedError, MeshRelError, UnknownTermError
from .ic import IcTable
from .vocab import VocabularyIndex

VIRTUAL_ROOT = "\x00virtual-root"


class GraphVariant(enum.Enum):
    UNIT = "unit"
    DELTA_IC = "dic"


@dataclass(frozen=True, eq=False)
class TermGraph:
    variant: GraphVariant
    vertices: tuple[str, ...]
    index: Mapping[str, int]
    # adjacency[u] = ((v, integer weight), ...); real weight = integer / scale
    adjacency: tuple[tuple[tuple[int, int], ...], ...]
    scale: int
    virtual_root: bool

    def __len__(self):
        return len(self.vertices)

    def vertex(self, term_id: str) -> int:
        try:
            return self.index[term_id]
        except KeyError:
            raise UnknownTermError(f"term {term_id!r} is not in the graph") from None

    def weight(self, a: str, b: str) -> float:
        u, v = self.vertex(a), self.vertex(b)
        for x, w in self.adjacency[u]:
            if x == v:
                return w / self.scale
        raise KeyError(f"no edge between {a!r} and {b!r}")

    def edges(self) -> list[tuple[str, str, float]]:
        """Each undirected edge once, as (lower index, higher index, weight)."""
        out = []
        for u, nbrs in enumerate(self.adjacency):
            for v, w in nbrs:
                if u < v:
                    out.append((self.vertices[u], self.vertices[v], w / self.scale))
        return out


def _dyadic(x: float) -> tuple[int, int]:
    num, den = float(x).as_integer_ratio()
    return num, den


def build_graph(vocab: VocabularyIndex, variant: GraphVariant, ic: IcTable | None = None,
                *, virtual_root: bool = True) -> TermGraph:
    if variant is GraphVariant.DELTA_IC and ic is None:
        raise MeshRelError("the DELTA_IC graph needs an IC table")
    if variant is GraphVariant.UNIT and ic is not None:
        raise MeshRelError("the UNIT graph takes no IC table")
    if VIRTUAL_ROOT in vocab:
        raise MeshRelError("vocabulary uses the reserved virtual root id")

    vertices = list(vocab.terms)
    if virtual_root:
        vertices.append(VIRTUAL_ROOT)
    index = {t: i for i, t in enumerate(vertices)}

    pairs = []
    for child in vocab.terms:
        for parent in sorted(vocab.parents[child]):
            pairs.append((parent, child))
    if virtual_root:
        pairs.extend((VIRTUAL_ROOT, r) for r in sorted(vocab.roots))

    if variant is GraphVariant.UNIT:
        weighted = [(a, b, 1, 1) for a, b in pairs]
    else:
        def level(t):
            return 0.0 if t == VIRTUAL_ROOT else ic[t]
        weighted = []
        for a, b in pairs:
            if b not in ic or (a != VIRTUAL_ROOT and a not in ic):
                raise UnknownTermError(f"IC table lacks {a!r} or {b!r}")
            weighted.append((a, b, *_dyadic(abs(level(a) - level(b)))))

    scale = max((den for *_, den in weighted), default=1)
    adjacency: list[list[tuple[int, int]]] = [[] for _ in vertices]
    for a, b, num, den in weighted:
        w = num * (scale // den)
        u, v = index[a], index[b]
        adjacency[u].append((v, w))
        adjacency[v].append((u, w))
    return TermGraph(
        variant=variant,
        vertices=tuple(vertices),
        index=index,
        adjacency=tuple(tuple(sorted(nbrs)) for nbrs in adjacency),
        scale=scale,
        virtual_root=virtual_root,
    )


def _search(graph: TermGraph, source: int, targets: set[int] | None = None) -> dict[int, int]:
    """Exact single-source shortest path lengths (scaled integers).

    Returns settled vertices only; with ``targets`` the search stops as soon as
    all of them are settled.
    """
    remaining = None if targets is None else set(targets)
    settled: dict[int, int] = {}
    adjacency = graph.adjacency
    if graph.variant is GraphVariant.UNIT:
        queue = deque([source])
        settled[source] = 0
        while queue:
            u = queue.popleft()
            if remaining is not None:
                remaining.discard(u)
                if not remaining:
                    break
            du = settled[u] + 1
            for v, _ in adjacency[u]:
                if v not in settled:
                    settled[v] = du
                    queue.append(v)
        # BFS labels are final on discovery
        return settled

    best = {source: 0}
    heap = [(0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in settled:
            continue
        settled[u] = d
        if remaining is not None:
            remaining.discard(u)
            if not remaining:
                break
        for v, w in adjacency[u]:
            if v in settled:
                continue
            nd = d + w
            old = best.get(v)
            if old is None or nd < old:
                best[v] = nd
                heapq.heappush(heap, (nd, v))
    return settled


class DistanceCache:
    """Memo of completed single-source rows for one graph.

    Rows are float arrays indexed by vertex; unreachable vertices hold inf.
    Safe for concurrent use: two threads computing the same row produce
    identical arrays, and the first one stored wins.
    """

    def __init__(self):
        self._rows: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()
        self._graph_id = None

    def __len__(self):
        return len(self._rows)

    def __contains__(self, vertex):
        return vertex in self._rows

    def _bind(self, graph):
        if self._graph_id is None:
            self._graph_id = id(graph)
        elif self._graph_id != id(graph):
            raise MeshRelError("a DistanceCache serves exactly one graph")

    def get(self, vertex):
        return self._rows.get(vertex)

    def row(self, graph: TermGraph, vertex: int) -> np.ndarray:
        self._bind(graph)
        cached = self._rows.get(vertex)
        if cached is not None:
            return cached
        settled = _search(graph, vertex)
        out = np.full(len(graph), math.inf)
        scale = graph.scale
        for v, d in settled.items():
            out[v] = d / scale
        out.flags.writeable = False
        with self._lock:
            return self._rows.setdefault(vertex, out)

    def clear(self):
        with self._lock:
            self._rows.clear()


def _finite(value, a, b):
    if value == math.inf:
        raise DisconnectedError(f"no path between {a!r} and {b!r}")
    return float(value)


def term_distance(graph: TermGraph, cache: DistanceCache, a: str, b: str) -> float:
    """Shortest-path length between two terms; memoised per source in ``cache``."""
    u, v = graph.vertex(a), graph.vertex(b)
    if u == v:
        return 0.0
    cached = cache.get(v)
    if cached is not None:
        return _finite(cached[u], a, b)
    return _finite(cache.row(graph, u)[v], a, b)


def single_source_distances(graph: TermGraph, source: str, targets: Iterable[str],
                            cache: DistanceCache | None = None) -> dict[str, float]:
    """Distances from ``source`` to each target, stopping once all are settled."""
    u = graph.vertex(source)
    wanted = {graph.vertex(t): t for t in targets}
    if not wanted:
        return {}
    if cache is not None and cache.get(u) is not None:
        row = cache.get(u)
        return {t: _finite(row[v], source, t) for v, t in wanted.items()}
    settled = _search(graph, u, set(wanted))
    out = {}
    for v, t in wanted.items():
        if v not in settled:
            raise DisconnectedError(f"no path between {source!r} and {t!r}")
        out[t] = settled[v] / graph.scale
    return out


def distance_matrix(graph: TermGraph, cache: DistanceCache, terms: list[str],
                    allow_inf: bool = False) -> np.ndarray:
    """Dense term-by-term distance block for ``terms`` (rows and columns in order)."""
    idx = np.fromiter((graph.vertex(t) for t in terms), dtype=np.intp, count=len(terms))
    out = np.empty((len(terms), len(terms)))
    for i, u in enumerate(idx):
        out[i] = cache.row(graph, int(u))[idx]
    if not allow_inf and np.isinf(out).any():
        i, j = np.argwhere(np.isinf(out))[0]
        raise DisconnectedError(f"no path between {terms[i]!r} and {terms[j]!r}")
    return out
