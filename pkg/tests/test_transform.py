from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from itexp.transform import (SUBWORD_LABEL, BpeMerges, apply_subword, binarize, is_binary,
                             join_subwords, learn_bpe, read_merges, write_merges)
from itexp.treebank import ROOT, DepTree, NonProjectiveInput, SchemaMismatch, depth, is_projective

from conftest import projective_trees


def inorder(tree: DepTree) -> list[str]:
    """Surface order recovered by an in-order walk, independent of token indices."""
    out = []

    def walk(i):
        for c in tree.left_dependents(i):
            walk(c)
        out.append(tree.forms[i])
        for c in tree.right_dependents(i):
            walk(c)

    walk(tree.root)
    return out


def test_binarize_dog(dog):
    b = binarize(dog)
    f = b.forms
    assert b.heads[f.index("dog")] == f.index("likes")
    assert b.heads[f.index("also")] == f.index("dog")
    assert b.deprels[f.index("also")] == "advmod"
    assert is_binary(b) and inorder(b) == dog.forms


def test_binarize_chain_is_identity():
    t = DepTree.from_lists(list("abcd"), [1, ROOT, 1, 2], ["x", "ROOT", "y", "z"])
    assert is_binary(t) and binarize(t) == t


def test_binarize_enumeration():
    # bought -> r1, r2, r3 as leaves on the right
    t = DepTree.from_lists(["bought", "r1", "r2", "r3"], [ROOT, 0, 0, 0],
                           ["ROOT", "dobj", "conj", "conj"])
    assert binarize(t).heads == [ROOT, 0, 1, 2]


def test_binarize_rejects_nonprojective():
    t = DepTree.from_lists(list("abcd"), [2, 3, ROOT, 2], ["x", "x", "ROOT", "x"])
    with pytest.raises(NonProjectiveInput):
        binarize(t)


@settings(max_examples=300, deadline=None)
@given(projective_trees(14))
def test_binarize_invariants(tree):
    b = binarize(tree)
    assert is_binary(b)
    assert is_projective(b)
    assert b.forms == tree.forms and inorder(b) == tree.forms
    assert b.deprels == tree.deprels
    assert binarize(b) == b
    n = len(tree)
    assert depth(b) >= depth(tree)
    assert depth(b) >= n.bit_length()  # ceil(log2(n + 1))


# -- BPE --------------------------------------------------------------------

def words_tree(*words):
    n = len(words)
    return DepTree.from_lists(list(words), [ROOT] + [0] * (n - 1), ["ROOT"] + ["dep"] * (n - 1))


def test_bpe_single_merge():
    assert learn_bpe([words_tree("abab")], 1).rules == [("a", "b")]


def test_bpe_zero_merges_splits_characters():
    m = learn_bpe([words_tree("hello")], 0)
    assert m.rules == []
    assert m.segment("cat") == ("c@@", "a@@", "t")


def test_bpe_frequent_word_dominates():
    trees = [words_tree("zq")] * 100 + [words_tree("ab")]
    m = learn_bpe(trees, 1)
    assert m.rules == [("z", "q</w>")]


def test_bpe_tie_breaks_lexicographically():
    m = learn_bpe([words_tree("xy", "ab")], 1)
    assert m.rules == [("a", "b</w>")]


def naive_bpe(words: Counter, num_merges: int) -> list[tuple[str, str]]:
    """Textbook BPE: recount every pair after each merge."""
    vocab = {tuple(w[:-1]) + (w[-1] + "</w>",): c for w, c in words.items()}
    rules = []
    for _ in range(num_merges):
        pairs = Counter()
        for sym, c in vocab.items():
            for p in zip(sym, sym[1:]):
                pairs[p] += c
        if not pairs:
            break
        best = min(pairs, key=lambda p: (-pairs[p], p))
        rules.append(best)
        new = {}
        for sym, c in vocab.items():
            out, i = [], 0
            while i < len(sym):
                if i + 1 < len(sym) and (sym[i], sym[i + 1]) == best:
                    out.append(sym[i] + sym[i + 1])
                    i += 2
                else:
                    out.append(sym[i])
                    i += 1
            new[tuple(out)] = new.get(tuple(out), 0) + c
        vocab = new
    return rules


@settings(max_examples=60, deadline=None)
@given(st.lists(st.text("abcde", min_size=1, max_size=7), min_size=1, max_size=15),
       st.integers(0, 25))
def test_bpe_matches_naive_learner(words, k):
    m = learn_bpe([words_tree(*words)], k)
    assert m.rules == naive_bpe(Counter(words), k)


def test_training_words_reproduce_segmentation(news):
    m = learn_bpe(news[:100], 300)
    for w in ["government", "said", "the"]:
        pieces = m.segment(w)
        assert join_subwords(pieces) == w


def test_merges_file_round_trip(tmp_path, news):
    m = learn_bpe(news[:50], 80)
    p = tmp_path / "m.bpe"
    write_merges(p, m)
    assert read_merges(p).rules == m.rules
    p.write_text("a b\n")
    with pytest.raises(SchemaMismatch):
        read_merges(p)


# -- subword transform ---------------------------------------------------------

def test_apply_subword_dog(dog):
    m = BpeMerges([("e", "a"), ("ea", "t"), ("i", "n"), ("in", "g</w>")])
    assert m.segment("eating") == ("eat@@", "ing")
    t = apply_subword(dog, m)
    f = t.forms
    eat, ing = f.index("eat@@"), f.index("ing")
    assert t.deprels[eat] == "xcomp" and t.heads[ing] == eat and t.deprels[ing] == SUBWORD_LABEL
    sausage_first = ing + 1
    assert t.heads[sausage_first] == ing and t.deprels[sausage_first] == "dobj"
    assert join_subwords(f) == dog.text()


def test_apply_subword_dog_word_level_merges(dog):
    # merges that keep every word whole except "eating"
    words = ["my", "dog", "also", "likes", "sausage"]
    trees = [words_tree(w) for w in words for _ in range(5)]
    m = learn_bpe(trees, 200)
    m = BpeMerges(m.rules + [("e", "a"), ("ea", "t"), ("i", "n"), ("in", "g</w>")])
    t = apply_subword(dog, m)
    assert t.forms == ["my", "dog", "also", "likes", "eat@@", "ing", "sausage"]
    assert t.heads == [1, 3, 3, ROOT, 3, 4, 5]
    assert t.deprels == ["poss", "nsubj", "advmod", "ROOT", "xcomp", SUBWORD_LABEL, "dobj"]


def test_single_piece_words_unchanged(dog):
    m = learn_bpe([dog] * 3, 500)
    assert apply_subword(dog, m) == dog


@settings(max_examples=150, deadline=None)
@given(projective_trees(10), st.integers(0, 30))
def test_subword_detokenizes_and_attaches_to_last_piece(tree, k):
    m = learn_bpe([tree], k)
    t = apply_subword(tree, m)
    assert join_subwords(t.forms) == tree.text()
    starts, n = [], 0
    for w in tree.forms:
        starts.append(n)
        n += len(m.segment(w))
    last = [starts[i] + len(m.segment(w)) - 1 for i, w in enumerate(tree.forms)]
    for d, h in enumerate(tree.heads):
        if h == ROOT:
            continue
        assert t.heads[starts[d]] == last[h]
        assert t.deprels[starts[d]] == tree.deprels[d]


@settings(max_examples=150, deadline=None)
@given(projective_trees(10), st.integers(0, 30))
def test_first_mode_keeps_projectivity(tree, k):
    m = learn_bpe([tree], k)
    t = apply_subword(tree, m, left_attach="first")
    assert is_projective(t)
    assert join_subwords(t.forms) == tree.text()
