from __future__ import annotations

import functools

import pytest
from hypothesis import strategies as st

from itexp.corpora import ball_tree, dog_tree, memorization_fixture, news_corpus
from itexp.treebank import ROOT, DepTree, parse_conllu, to_conllu

LABELS = ["nsubj", "dobj", "amod", "det", "case", "nmod", "advmod", "punct"]
WORDS = ["a", "b", "cat", "dogs", "eat", "fish", "go", "the", "x", "yy"]


# -- hypothesis strategies --------------------------------------------------

@st.composite
def projective_trees(draw, max_size: int = 12) -> DepTree:
    """Random projective trees built by recursive interval splitting."""
    n = draw(st.integers(1, max_size))
    heads = [ROOT] * n

    def build(lo: int, hi: int, parent: int) -> None:
        r = draw(st.integers(lo, hi - 1))
        heads[r] = parent
        for a, b in ((lo, r), (r + 1, hi)):
            start = a
            while start < b:
                end = draw(st.integers(start + 1, b))
                build(start, end, r)
                start = end

    build(0, n, ROOT)
    forms = [draw(st.sampled_from(WORDS)) for _ in range(n)]
    rels = ["ROOT" if h == ROOT else draw(st.sampled_from(LABELS)) for h in heads]
    return DepTree.from_lists(forms, heads, rels)


@st.composite
def any_trees(draw, max_size: int = 8) -> DepTree:
    """Random rooted trees, projective or not."""
    n = draw(st.integers(1, max_size))
    order = draw(st.permutations(range(n)))
    heads = [ROOT] * n
    for k in range(1, n):
        heads[order[k]] = order[draw(st.integers(0, k - 1))]
    rels = ["ROOT" if h == ROOT else draw(st.sampled_from(LABELS)) for h in heads]
    return DepTree.from_lists([f"w{i}" for i in range(n)], heads, rels)


def crossing_oracle(tree: DepTree) -> bool:
    """Projective iff no two arcs cross, the root arc coming from the left edge."""
    arcs = [(min(h, d), max(h, d)) if h != ROOT else (-1, d)
            for d, h in enumerate(tree.heads)]
    for a, b in arcs:
        for c, d in arcs:
            if a < c < b < d:
                return False
    return True


# -- corpora ---------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def _news(n: int, seed: int) -> tuple[DepTree, ...]:
    return tuple(news_corpus(n, seed))


@functools.lru_cache(maxsize=None)
def ingested_corpus(n: int = 2000, seed: int = 11):
    """Synthetic trees written out as CoNLL-U and read back through the parser."""
    return parse_conllu(to_conllu(_news(n, seed)), source="synthetic")


@pytest.fixture(scope="session")
def news():
    return _news(400, 5)


@pytest.fixture
def dog():
    return dog_tree()


@pytest.fixture
def ball():
    return ball_tree()


@pytest.fixture(scope="session")
def memo_trees():
    return memorization_fixture()


# -- acceptance report ---------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    number, title = mark.args
    prev = _CRITERIA.get(number)
    if prev is None or prev[1] == "passed":
        duration = (prev[2] if prev else 0.0) + rep.duration
        _CRITERIA[number] = (title, rep.outcome, duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcome, duration = _CRITERIA[number]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        tr.write_line(f"C{number:02d} {verdict}  {title}  ({duration:.1f}s)")
    passed = sum(v[1] == "passed" for v in _CRITERIA.values())
    tr.write_line(f"{passed}/{len(_CRITERIA)} criteria passed")
