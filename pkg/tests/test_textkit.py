import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from citerel.corpus import Document
from citerel.textkit import (
    CITE_TOKEN,
    TfidfModel,
    Tokenizer,
    fit_tfidf,
    gestalt_ratio,
    longest_match,
    score_terms,
)


def doc(i, text):
    return Document(f"d{i}", abstract=text)


@pytest.fixture
def abc_model():
    return fit_tfidf([doc(0, "a a b"), doc(1, "b c"), doc(2, "c")], fields=("abstract",))


class TestTokenizer:
    tok = Tokenizer()

    def test_basic(self):
        assert self.tok("") == []
        assert self.tok("A cat.") == ["a", "cat", "."]

    @pytest.mark.parametrize("text, expected", [
        ("Café naïve résumé.", ["café", "naïve", "résumé", "."]),
        ("Модель BERT-base работает!", ["модель", "bert", "-", "base", "работает", "!"]),
        ("Transformer 模型 很好", ["transformer", "模型", "很好"]),
        ("x=3.5, y≈2", ["x", "=", "3", ".", "5", ",", "y", "≈", "2"]),
        ("We use ⟨CITE⟩ for αβ-tests", ["we", "use", CITE_TOKEN, "for", "αβ", "-", "tests"]),
    ])
    def test_mixed_script(self, text, expected):
        assert self.tok(text) == expected

    def test_case_preserving(self):
        assert Tokenizer(lowercase=False)("A Cat") == ["A", "Cat"]

    def test_pluggable(self):
        t = Tokenizer(fn=lambda s: list(s.replace(" ", "")))
        assert t.mode == "pluggable"
        assert t("ab c") == ["a", "b", "c"]


class TestTfidf:
    def test_hand_counts(self, abc_model):
        assert abc_model.n_docs == 3
        assert dict(abc_model.doc_freq) == {"a": 1, "b": 2, "c": 2}

    def test_single_doc(self):
        model = fit_tfidf([doc(0, "x y y z")], fields=("abstract",))
        assert set(model.doc_freq.values()) == {1}

    def test_empty_corpus(self):
        with pytest.raises(ValueError):
            fit_tfidf([])

    def test_scores(self, abc_model):
        ranked = score_terms(abc_model, doc(0, "a a b"))
        assert [t for t, _ in ranked] == ["a", "b"]
        assert ranked[0][1] == pytest.approx(2 * math.log(3), abs=1e-12)
        assert ranked[1][1] == pytest.approx(math.log(1.5), abs=1e-12)

    def test_unseen_term_df_floor(self, abc_model):
        ranked = dict(score_terms(abc_model, doc(9, "zebra")))
        assert ranked["zebra"] == pytest.approx(math.log(3))

    def test_tie_rule(self, abc_model):
        assert [t for t, _ in score_terms(abc_model, doc(5, "c b"))] == ["b", "c"]

    def test_punctuation_not_scored(self, abc_model):
        assert [t for t, _ in score_terms(abc_model, doc(5, "a , . ⟨CITE⟩"))] == ["a"]

    def test_fingerprint_and_roundtrip(self, abc_model, tmp_path):
        again = fit_tfidf([doc(0, "a a b"), doc(1, "b c"), doc(2, "c")], fields=("abstract",))
        assert again.fingerprint == abc_model.fingerprint
        path = tmp_path / "tfidf.json"
        abc_model.save(path)
        loaded = TfidfModel.load(path)
        assert loaded.fingerprint == abc_model.fingerprint
        assert loaded.idf("a") == abc_model.idf("a")

    def test_rank_stability_under_duplication(self):
        base = [doc(0, "a a b c"), doc(1, "b d"), doc(2, "c d e")]
        doubled = [Document(d.doc_id, abstract=d.abstract + " " + d.abstract) for d in base]
        m1 = fit_tfidf(base, fields=("abstract",))
        m2 = fit_tfidf(doubled, fields=("abstract",))
        for a, b in zip(base, doubled):
            assert [t for t, _ in score_terms(m1, a)] == [t for t, _ in score_terms(m2, b)]

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.lists(st.sampled_from("p q r s t u".split()), min_size=1, max_size=8),
                    min_size=1, max_size=6))
    def test_sorted_and_df_bounds(self, docs):
        corpus = [doc(i, " ".join(d)) for i, d in enumerate(docs)]
        model = fit_tfidf(corpus, fields=("abstract",))
        assert all(1 <= df <= model.n_docs for df in model.doc_freq.values())
        ranked = score_terms(model, corpus[0])
        keys = [(-s, t) for t, s in ranked]
        assert keys == sorted(keys) and len(set(keys)) == len(keys)


class TestGestalt:
    def test_examples(self):
        assert gestalt_ratio("abc", "abc") == 1.0
        assert gestalt_ratio("abc", "xyz") == 0.0
        assert gestalt_ratio("", "") == 1.0
        assert gestalt_ratio("", "a") == 0.0
        assert gestalt_ratio("neural network", "neural networks") == 28 / 29
        assert gestalt_ratio("Neural Network", "neural networkS") == 28 / 29

    def test_leftmost_block(self):
        # "ab" occurs twice in b; the leftmost occurrence is chosen
        assert longest_match("ab", "xabab", 0, 2, 0, 5) == (0, 1, 2)

    def test_matches_difflib_and_brute_force(self):
        rng = random.Random(11)
        for _ in range(300):
            a = "".join(rng.choice("abcd ") for _ in range(rng.randint(0, 14)))
            b = "".join(rng.choice("abcd ") for _ in range(rng.randint(0, 14)))
            assert gestalt_ratio(a, b) == pytest.approx(oracles.gestalt(a, b), abs=1e-12)
            assert gestalt_ratio(a, b) == pytest.approx(oracles.gestalt_brute(a, b), abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.text(max_size=20), st.text(max_size=20))
    def test_bounds(self, a, b):
        assert 0.0 <= gestalt_ratio(a, b) <= 1.0
        assert gestalt_ratio(a, a) == 1.0

    @settings(max_examples=60, deadline=None)
    @given(st.text("abc", min_size=1, max_size=10), st.text("xyz", min_size=1, max_size=10))
    def test_disjoint_alphabets(self, a, b):
        assert gestalt_ratio(a, b) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.text(max_size=15), st.text(max_size=15))
def test_concatenation_stability(a, b):
    tok = Tokenizer()
    assert tok(a + " " + b) == tok(a) + tok(b)
