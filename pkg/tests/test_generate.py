import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from itexp.evaluation import adjective_rate
from itexp.generate import (GenerationSettings, PredictorFailure, ZeroMassAfterMasking,
                            generate, nucleus_filter, style_reweight, temperature_scale)
from itexp.leveler import levelize
from itexp.predictor import PositionPrediction, fit_empirical, oracle_predictor
from itexp.treebank import depth
from itexp.vocab import induce_vocabs, is_placeholder

from conftest import projective_trees


@pytest.fixture(scope="module")
def empirical(news):
    table = induce_vocabs(news)
    return fit_empirical([t for tree in news for t in levelize(tree)], table)


def test_nucleus_example():
    d = nucleus_filter([0.5, 0.3, 0.15, 0.05], 0.8)
    assert np.allclose(d, [0.625, 0.375, 0, 0])
    assert np.allclose(nucleus_filter([0.5, 0.3, 0.2], 1.0), [0.5, 0.3, 0.2])


def test_nucleus_keeps_top_even_for_tiny_p():
    assert np.allclose(nucleus_filter([0.2, 0.7, 0.1], 1e-9), [0, 1, 0])


def test_temperature_examples():
    d = np.array([0.6, 0.3, 0.1])
    assert np.allclose(temperature_scale(d, 1.0), d)
    sharp = temperature_scale(d, 0.5)
    assert np.allclose(sharp, d ** 2 / (d ** 2).sum())
    assert temperature_scale(d, 1e-3)[0] > 0.999
    flat = temperature_scale(d, 1e3)
    assert np.allclose(flat, 1 / 3, atol=1e-3)
    with pytest.raises(ValueError):
        temperature_scale(d, 0)


def test_style_reweight_example():
    syms = ["[pad]", "[OOV]", "[HEAD]", "[amod-HEAD]", "[det-amod-HEAD]"]
    d = np.array([0, 0, 0.8, 0.1, 0.1])
    out = style_reweight(d, syms, [("amod", 4.0)])
    assert np.allclose(out, [0, 0, 0.5, 0.25, 0.25])
    assert np.allclose(style_reweight(d, syms, []), d)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(1e-3, 1), min_size=2, max_size=12), st.floats(0.01, 1.0),
       st.floats(0.1, 5.0))
def test_filters_return_distributions(w, p, tau):
    d = np.array(w) / sum(w)
    for out in (nucleus_filter(d, p), temperature_scale(d, tau)):
        assert np.isclose(out.sum(), 1) and (out >= 0).all()
    kept = nucleus_filter(d, p) > 0
    assert d[kept].sum() >= p - 1e-9
    # dropping the smallest kept entry falls below p
    if kept.sum() > 1:
        assert d[kept].sum() - d[kept].min() < p + 1e-9


def test_settings_validation():
    for bad in [dict(temperature=0), dict(top_p=0), dict(top_p=1.5), dict(max_iterations=0),
                dict(style=(("amod", 0),))]:
        with pytest.raises(ValueError):
            GenerationSettings(**bad)


def test_oracle_generation_reproduces_reference(ball, dog):
    for tree in (dog, ball):
        table = induce_vocabs([tree])
        (g,) = generate(oracle_predictor(tree, table), GenerationSettings(), 1)
        assert g.tree == tree and g.iterations == depth(tree)
        assert g.transitions == levelize(tree)


@settings(max_examples=40, deadline=None)
@given(projective_trees(12))
def test_oracle_iterations_equal_depth(tree):
    table = induce_vocabs([tree])
    (g,) = generate(oracle_predictor(tree, table), GenerationSettings(temperature=0.3), 1)
    assert g.iterations == depth(tree) and g.tree.forms == tree.forms


def test_determinism_and_worker_independence(empirical):
    s = GenerationSettings(seed=7)
    a = [g.text for g in generate(empirical, s, 20)]
    b = [g.text for g in generate(empirical, s, 20, workers=4)]
    assert a == b
    c = [g.text for g in generate(empirical, GenerationSettings(seed=8), 20)]
    assert c[:19] == a[1:]  # sentence k uses seed + k


def test_no_special_symbols_in_output(empirical):
    for g in generate(empirical, GenerationSettings(temperature=1.5, top_p=1.0), 40):
        for w in g.tree.forms:
            assert w not in ("<unk>", "[pad]") and not is_placeholder(w)


def test_single_iteration_forces_head(empirical):
    for g in generate(empirical, GenerationSettings(max_iterations=1), 10):
        assert g.iterations == 1 and len(g.tree) == 1


def test_max_iterations_caps_depth(empirical):
    for g in generate(empirical, GenerationSettings(max_iterations=3, top_p=1.0), 30):
        assert g.iterations <= 3 and depth(g.tree) <= 3


class _Fixed:
    """Every position predicts the same distributions."""

    def __init__(self, table, tok, exp):
        self.table, self.tok, self.exp = table, tok, exp

    def predict(self, i_tok, heads):
        return [PositionPrediction(self.tok, self.exp) for _ in i_tok]


def test_zero_mass_after_masking(dog):
    table = induce_vocabs([dog])
    tok = np.zeros(table.num_tokens)
    tok[1] = 1.0  # all mass on <unk>
    exp = np.zeros(table.num_expansions)
    exp[table.expansion_ids["[HEAD]"]] = 1
    with pytest.raises(ZeroMassAfterMasking):
        generate(_Fixed(table, tok, exp), GenerationSettings(), 1)


def test_broken_predictor_is_reported(dog):
    class Broken:
        table = induce_vocabs([dog])

        def predict(self, i_tok, heads):
            raise IndexError("boom")

    with pytest.raises(PredictorFailure):
        generate(Broken(), GenerationSettings(), 1)


def test_length_budget_forces_head(dog):
    table = induce_vocabs([dog])
    tok = np.zeros(table.num_tokens)
    tok[table.token_ids["dog"]] = 1
    exp = np.zeros(table.num_expansions)
    exp[table.expansion_ids["[nsubj-advmod-HEAD-xcomp]"]] = 1
    p = _Fixed(table, tok, exp)
    p.max_len = 10
    (g,) = generate(p, GenerationSettings(max_iterations=50), 1)
    assert len(g.tree) <= 10


def test_style_raises_label_rate(empirical):
    base = generate(empirical, GenerationSettings(seed=3), 150)
    boosted = generate(empirical, GenerationSettings(seed=3, style=(("amod", 10.0),)), 150)
    assert adjective_rate([g.tree for g in boosted]) > adjective_rate([g.tree for g in base])
