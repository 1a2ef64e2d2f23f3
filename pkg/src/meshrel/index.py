"""Bundle of everything the measures need, and its on-disk form.

Index file layout::

    magic (8 bytes) | format version (uint16, big endian) |
    sha256 of body (32 bytes) | body = zlib(pickle(payload))

Index files are pickles: only load files you built yourself.
"""

from __future__ import annotations

import hashlib
import math
import pickle
import struct
import zlib
from dataclasses import dataclass, field

from .errors import IndexFormatError, MeshRelError
from .graph import DistanceCache, GraphVariant, TermGraph, build_graph
from .ic import FrequencyTable, IcTable, compute_ic, term_frequencies
from .vocab import Corpus, VocabularyIndex

MAGIC = b"MESHREL\x00"
FORMAT_VERSION = 1
_HEADER = struct.Struct(">8sH32s")


@dataclass
class IndexBundle:
    vocab: VocabularyIndex
    corpus: Corpus
    freqs: FrequencyTable
    ic: IcTable
    graphs: dict[GraphVariant, TermGraph]
    config: dict = field(default_factory=dict)
    caches: dict[GraphVariant, DistanceCache] = field(default_factory=dict, repr=False)

    def graph(self, variant: GraphVariant) -> TermGraph:
        try:
            return self.graphs[variant]
        except KeyError:
            raise MeshRelError(f"index has no {variant.value} graph") from None

    def cache(self, variant: GraphVariant) -> DistanceCache:
        if variant not in self.caches:
            self.caches[variant] = DistanceCache()
        return self.caches[variant]

    def __getstate__(self):
        state = self.__dict__.copy()
        state["caches"] = {}
        return state


def build_bundle(vocab: VocabularyIndex, corpus: Corpus, *, log_base: float = math.e,
                 universe: str = "all", virtual_root: bool = True) -> IndexBundle:
    freqs = term_frequencies(corpus, vocab)
    ic = compute_ic(vocab, freqs, log_base=log_base, universe=universe)
    graphs = {
        GraphVariant.UNIT: build_graph(vocab, GraphVariant.UNIT, virtual_root=virtual_root),
        GraphVariant.DELTA_IC: build_graph(vocab, GraphVariant.DELTA_IC, ic,
                                           virtual_root=virtual_root),
    }
    config = {"ic_log_base": log_base, "ic_universe": universe, "virtual_root": virtual_root}
    return IndexBundle(vocab, corpus, freqs, ic, graphs, config)


def save_index(bundle: IndexBundle, path) -> None:
    body = zlib.compress(pickle.dumps(bundle, protocol=pickle.HIGHEST_PROTOCOL))
    digest = hashlib.sha256(body).digest()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, digest))
        fh.write(body)


def load_index(path) -> IndexBundle:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        body = fh.read()
    if len(head) < _HEADER.size:
        raise IndexFormatError(f"{path}: truncated index file")
    magic, version, digest = _HEADER.unpack(head)
    if magic != MAGIC:
        raise IndexFormatError(f"{path}: not a meshrel index file")
    if version != FORMAT_VERSION:
        raise IndexFormatError(
            f"{path}: index format version {version}, this build reads {FORMAT_VERSION}")
    if hashlib.sha256(body).digest() != digest:
        raise IndexFormatError(f"{path}: checksum mismatch, file is corrupt")
    bundle = pickle.loads(zlib.decompress(body))
    if not isinstance(bundle, IndexBundle):
        raise IndexFormatError(f"{path}: unexpected payload")
    return bundle
