"""Publication relatedness over hierarchical controlled vocabularies."""

__version__ = "0.1.0"

from .errors import MeshRelError
from .graph import GraphVariant, build_graph, single_source_distances, term_distance
from .ic import compute_ic, term_frequencies
from .index import IndexBundle, build_bundle, load_index, save_index
from .measures import (ALL_MEASURES, MeasureSpec, Orientation, RelatednessScore, compute,
                       dist_weighted, sim_ahlgren, sim_boudreau)
from .vocab import descendants_of, parse_corpus, parse_vocabulary, read_corpus, read_vocabulary

__all__ = [
    "ALL_MEASURES", "GraphVariant", "IndexBundle", "MeasureSpec", "MeshRelError", "Orientation",
    "RelatednessScore", "build_bundle", "build_graph", "compute", "compute_ic", "descendants_of",
    "dist_weighted", "load_index", "parse_corpus", "parse_vocabulary", "read_corpus",
    "read_vocabulary", "save_index",
    "sim_ahlgren", "sim_boudreau", "single_source_distances", "term_distance", "term_frequencies",
]
