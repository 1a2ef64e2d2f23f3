import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from meshrel.index import build_bundle
from meshrel.synthetic import make_corpus, make_vocabulary
from meshrel.vocab import read_corpus, read_vocabulary

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def toy_vocab():
    return read_vocabulary(DATA / "toy5.vocab.tsv")


@pytest.fixture
def toy_corpus(toy_vocab):
    return read_corpus(DATA / "toy5.corpus.tsv", toy_vocab)


@pytest.fixture
def toy_bundle(toy_vocab, toy_corpus):
    return build_bundle(toy_vocab, toy_corpus)


def random_instance(seed, max_terms=50, max_docs=200):
    """A random vocabulary (with multi-parent terms) and a corpus over it."""
    rng = random.Random(seed)
    n_terms = rng.randint(2, max_terms)
    vocab = make_vocabulary(n_terms, n_roots=rng.randint(1, min(3, n_terms)),
                            extra_position_rate=0.2, rng=rng)
    corpus = make_corpus(vocab, rng.randint(0, max_docs), rng,
                         terms_per_doc=(1, min(8, len(vocab))))
    return vocab, corpus


def term_trees(vocab):
    return {t: [str(tn) for tn in term.tree_numbers] for t, term in vocab.terms.items()}


# -- acceptance summary ------------------------------------------------------

_criteria = {}
_outcomes = {}


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker is not None:
            _criteria[item.nodeid] = marker.args[0]


def pytest_runtest_logreport(report):
    if report.nodeid not in _criteria:
        return
    if report.when == "call" or report.outcome != "passed":
        prev = _outcomes.get(report.nodeid)
        if prev is None or prev == "passed":
            _outcomes[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, label in _criteria.items():
        if nodeid in _outcomes:
            verdict = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[_outcomes[nodeid]]
            terminalreporter.write_line(f"{verdict:4}  {label}")
