"""Command-line front end: ``meshrel <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import (DEFAULT_RANGES, ScoreTable, aggregate_judgements, density_histogram,
                        enumerate_pairs, filter_topics, format_histograms, format_report,
                        raw_scores, read_qrels, report_to_dict, restrict_to_corpus,
                        run_benchmark)
from .errors import FormatError, MeshRelError
from .graph import GraphVariant, term_distance
from .ic import format_ic
from .index import build_bundle, load_index, save_index
from .measures import MeasureSpec, Orientation, compute, parse_measures
from .synthetic import format_passages, make_dataset
from .vocab import format_corpus, format_vocabulary, read_corpus, read_vocabulary

logger = logging.getLogger("meshrel")


def _log_base(text):
    if text.strip().lower() == "e":
        return math.e
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 1:
        raise argparse.ArgumentTypeError("log base must exceed 1")
    return value


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _fraction(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError("must lie in (0, 1]")
    return value


def _range(text):
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected LO,HI") from None
    if not lo < hi:
        raise argparse.ArgumentTypeError("LO must be below HI")
    return lo, hi


def _measures(text):
    try:
        return parse_measures(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _measure(text):
    try:
        return MeasureSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshrel",
        description="Publication relatedness over a hierarchical controlled vocabulary.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    source = argparse.ArgumentParser(add_help=False)
    g = source.add_argument_group("data source")
    g.add_argument("--index", type=Path, help="prebuilt index file (from build-index)")
    g.add_argument("--vocab", type=Path, help="vocabulary TSV: id, name, tree numbers")
    g.add_argument("--corpus", type=Path, help="corpus TSV: doc id, term entries")
    g.add_argument("--ic-log-base", type=_log_base, default=math.e, metavar="BASE",
                   help="logarithm base for information content, 'e' or a number (default: e)")
    g.add_argument("--ic-universe", choices=("all", "observed"), default="all",
                   help="terms summed in the IC normaliser (default: all)")
    g.add_argument("--no-virtual-root", action="store_true",
                   help="do not join top-level categories; cross-category distance becomes an error")

    bench_opts = argparse.ArgumentParser(add_help=False)
    b = bench_opts.add_argument_group("benchmark")
    b.add_argument("--measures", type=_measures, default=_measures("all"),
                   help="'all' or a comma list of measures (default: all)")
    b.add_argument("--qrels", type=Path, help="relevance TSV: topic id, doc id, grade")
    b.add_argument("--topic-threshold", type=_fraction, default=0.10,
                   help="minimum share of grade 1/2 documents per topic (default: 0.10)")
    b.add_argument("--drop-missing", action="store_true",
                   help="ignore judged documents absent from the corpus instead of failing")
    b.add_argument("--threads", type=_positive_int, default=1,
                   help="worker threads; results do not depend on it (default: 1)")
    b.add_argument("--bins", type=_positive_int, default=50, help="histogram bins (default: 50)")
    b.add_argument("--sim-range", type=_range, default=DEFAULT_RANGES[Orientation.SIMILARITY],
                   metavar="LO,HI", help="histogram range for similarities (default: 0,0.5)")
    b.add_argument("--dist-range", type=_range, default=DEFAULT_RANGES[Orientation.DISTANCE],
                   metavar="LO,HI", help="histogram range for distances (default: 0,17.5)")

    p = sub.add_parser("build-index", parents=[source], help="parse inputs, compute IC and graphs, save")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("compute", parents=[source], help="score publication pairs")
    p.add_argument("--measure", type=_measure, required=True,
                   help="boudreau, ahlgren, or dist{0,1,2,3}:{unit,dic}")
    p.add_argument("--pairs", type=Path, required=True, help="TSV of doc_id pairs")
    p.add_argument("--out", type=Path, help="output file (default: stdout)")

    p = sub.add_parser("bench", parents=[source, bench_opts], help="run both benchmark tests")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--iterations", type=_positive_int, default=30)
    p.add_argument("--sample-size", type=_positive_int, default=10)
    p.add_argument("--out", type=Path, required=True, help="report TSV")
    p.add_argument("--json", type=Path, help="machine-readable report")
    p.add_argument("--histogram-out", type=Path, help="histogram TSV")

    p = sub.add_parser("histogram", parents=[source, bench_opts],
                       help="score histograms over the rr and nrr pairs")
    p.add_argument("--out", type=Path, help="output file (default: stdout)")

    p = sub.add_parser("dump-ic", parents=[source], help="write frequency, subtree mass and IC per term")
    p.add_argument("--out", type=Path, help="output file (default: stdout)")

    p = sub.add_parser("term-distance", parents=[source], help="shortest-path distance between two terms")
    p.add_argument("--graph", choices=[v.value for v in GraphVariant], default="unit")
    p.add_argument("term_a", help="term id or exact name")
    p.add_argument("term_b", help="term id or exact name")

    p = sub.add_parser("synth", help="write a synthetic vocabulary, corpus and qrels")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--terms", type=_positive_int, default=400)
    p.add_argument("--out-dir", type=Path, required=True)
    return parser


def _load(args, parser):
    if args.index is not None:
        return load_index(args.index)
    if args.vocab is None or args.corpus is None:
        parser.error(f"{args.command}: --vocab and --corpus are required unless --index is given")
    vocab = read_vocabulary(args.vocab)
    corpus = read_corpus(args.corpus, vocab)
    return build_bundle(vocab, corpus, log_base=args.ic_log_base, universe=args.ic_universe,
                        virtual_root=not args.no_virtual_root)


def _resolved_config(args, bundle=None) -> dict:
    skip = {"verbose", "out", "json", "histogram_out", "threads", "out_dir"}
    cfg = {}
    for key, value in sorted(vars(args).items()):
        if key in skip or value is None:
            continue
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, MeasureSpec):
            value = value.label
        elif isinstance(value, list):
            value = [v.label for v in value]
        elif isinstance(value, tuple):
            value = list(value)
        cfg[key] = value
    if bundle is not None:
        cfg.update({f"index_{k}": v for k, v in bundle.config.items()})
    return cfg


def _echo(args, cfg):
    print(f"meshrel {args.command}: config {json.dumps(cfg, sort_keys=True)}", file=sys.stderr)


def _write(path, text):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _read_pairs(path):
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2 or not all(fields):
                raise FormatError("expected doc_id<TAB>doc_id", str(path), no)
            pairs.append((fields[0], fields[1], no))
    return pairs


def _judgements(args, bundle):
    if args.qrels is None:
        raise MeshRelError(f"{args.command} needs --qrels")
    docs = aggregate_judgements(read_qrels(args.qrels))
    return restrict_to_corpus(docs, bundle.corpus, drop_missing=args.drop_missing)


def cmd_build_index(args, parser):
    bundle = _load(args, parser)
    _echo(args, _resolved_config(args, bundle))
    save_index(bundle, args.out)
    print(f"wrote {args.out}: {len(bundle.vocab)} terms, {len(bundle.corpus)} publications",
          file=sys.stderr)


def cmd_compute(args, parser):
    bundle = _load(args, parser)
    _echo(args, _resolved_config(args, bundle))
    lines = []
    for a, b, no in _read_pairs(args.pairs):
        for doc in (a, b):
            if doc not in bundle.corpus:
                raise FormatError(f"unknown document {doc!r}", str(args.pairs), no)
        score = compute(args.measure, bundle.corpus[a], bundle.corpus[b], bundle)
        lines.append(f"{a}\t{b}\t{score.value!r}\t{score.orientation.value}\n")
    _write(args.out, "".join(lines))


def _ranges(args):
    return {Orientation.SIMILARITY: args.sim_range, Orientation.DISTANCE: args.dist_range}


def cmd_bench(args, parser):
    bundle = _load(args, parser)
    cfg = _resolved_config(args, bundle)
    _echo(args, cfg)
    report = run_benchmark(args.measures, bundle, _judgements(args, bundle), args.seed,
                           iterations=args.iterations, sample_size=args.sample_size,
                           topic_threshold=args.topic_threshold, bins=args.bins,
                           ranges=_ranges(args), threads=args.threads, config=cfg)
    _write(args.out, format_report(report))
    if args.json is not None:
        _write(args.json, json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n")
    if args.histogram_out is not None:
        _write(args.histogram_out, format_histograms((r.measure, r.histogram) for r in report.rows))


def cmd_histogram(args, parser):
    bundle = _load(args, parser)
    _echo(args, _resolved_config(args, bundle))
    topics = filter_topics(_judgements(args, bundle), args.topic_threshold)
    if not topics.topics:
        raise MeshRelError("no topic passes the relevance threshold")
    pairs = enumerate_pairs(topics)
    ranges = _ranges(args)
    rows = []
    for spec in args.measures:
        table = ScoreTable(spec, topics, bundle, threads=args.threads)
        rr_values, nrr_values = table.group_values(pairs)
        values = raw_scores(np.concatenate([nrr_values, rr_values]), spec)
        lo, hi = ranges[spec.orientation]
        rows.append((spec.label, density_histogram(values, args.bins, lo, hi)))
    _write(args.out, format_histograms(rows))


def cmd_dump_ic(args, parser):
    bundle = _load(args, parser)
    _echo(args, _resolved_config(args, bundle))
    _write(args.out, format_ic(bundle.ic, bundle.freqs))


def cmd_term_distance(args, parser):
    bundle = _load(args, parser)
    _echo(args, _resolved_config(args, bundle))
    variant = GraphVariant(args.graph)
    a, b = bundle.vocab.find(args.term_a), bundle.vocab.find(args.term_b)
    d = term_distance(bundle.graph(variant), bundle.cache(variant), a, b)
    print(f"{a}\t{b}\t{d!r}")


def cmd_synth(args, parser):
    _echo(args, _resolved_config(args))
    vocab, corpus, passages = make_dataset(args.seed, n_terms=args.terms)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    _write(args.out_dir / "vocab.tsv", format_vocabulary(vocab))
    _write(args.out_dir / "corpus.tsv", format_corpus(corpus))
    _write(args.out_dir / "qrels.tsv", format_passages(passages))


COMMANDS = {
    "build-index": cmd_build_index,
    "compute": cmd_compute,
    "bench": cmd_bench,
    "histogram": cmd_histogram,
    "dump-ic": cmd_dump_ic,
    "term-distance": cmd_term_distance,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        COMMANDS[args.command](args, parser)
    except (MeshRelError, OSError, ValueError) as exc:
        print(f"meshrel: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
