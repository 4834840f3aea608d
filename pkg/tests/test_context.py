import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from citerel.context import (
    CITED_VIEWS,
    PRINCIPAL_VIEWS,
    AssembledContext,
    ContextError,
    ContextSpec,
    SpecialTokens,
    assemble,
    build_cited_entities,
    build_cited_sentences,
    build_cited_tfidf,
    build_context,
    build_principal_view,
    layout_errors,
    rank_entities,
)
from citerel.corpus import Document, ExplanationInstance, build_splits, make_split_plan
from citerel.textkit import Tokenizer, fit_tfidf

TOKS = SpecialTokens()


@pytest.fixture
def abc():
    docs = [Document("d0", abstract="a a b", entity_annotations=("a b", "b", "zz", "A B")),
            Document("d1", abstract="b c"), Document("d2", abstract="c")]
    return docs, fit_tfidf(docs, fields=("abstract",))


def test_special_tokens_validated():
    TOKS.validate(Tokenizer())
    with pytest.raises(ValueError):
        SpecialTokens(sep_principal="⟨X⟩", sep_target="⟨X⟩").validate()
    with pytest.raises(ValueError):
        SpecialTokens(sep_tfidf="the").validate(Tokenizer())
    assert SpecialTokens.from_config({"pad": "<pad>"}).pad == "<pad>"


def test_spec_validation():
    with pytest.raises(ValueError):
        ContextSpec(principal_budget=0)
    with pytest.raises(ValueError):
        ContextSpec(cited_view="summary")
    assert ContextSpec().total_length == 1002


class TestPrincipal:
    def test_short_abstract_whole(self):
        doc = Document("s", abstract="A short abstract.")
        assert build_principal_view(doc, None, ContextSpec()) == ["a", "short", "abstract", "."]

    def test_target_removed(self):
        doc = Document("s", abstract="We study parsing. We build on [CITE:c] for speed. It works.")
        inst = ExplanationInstance("s", "c", (), "test", sentence="We build on [CITE:c] for speed.")
        out = build_principal_view(doc, inst, ContextSpec())
        assert out == ["we", "study", "parsing", ".", "it", "works", "."]

    def test_600_token_intro_prefix(self):
        words = [f"w{i}" for i in range(600)]
        doc = Document("s", introduction=" ".join(words))
        out = build_principal_view(doc, None, ContextSpec(principal_view="introduction"))
        assert out == words[:450]


class TestCitedSentences:
    def test_abstract_prefix(self):
        doc = Document("c", abstract=" ".join(["x"] * 500))
        assert len(build_cited_sentences(doc, ContextSpec())) == 450

    def test_all_citing_errors(self):
        doc = Document("c", abstract="See [CITE:a]. Also [CITE:b].")
        with pytest.raises(ContextError):
            build_cited_sentences(doc, ContextSpec(cited_view="sampled"))

    def test_sampled_short_doc_in_order(self):
        doc = Document("c", abstract="One here. Two [CITE:x] there.", introduction="Three now.",
                       body_paragraphs=("Four last.",))
        out = build_cited_sentences(doc, ContextSpec(cited_view="sampled"))
        assert out == ["one", "here", ".", "three", "now", ".", "four", "last", "."]

    def test_sampled_deterministic_and_budgeted(self):
        body = tuple(" ".join(f"p{i}s{j} word word." for j in range(10)) for i in range(20))
        doc = Document("c", abstract="Start.", body_paragraphs=body)
        spec = ContextSpec(cited_view="sampled", cited_budget=60, sample_seed=9)
        a = build_cited_sentences(doc, spec)
        assert a == build_cited_sentences(doc, spec)
        assert len(a) == 60
        assert a != build_cited_sentences(doc, ContextSpec(cited_view="sampled", cited_budget=60, sample_seed=10))


class TestTermLists:
    def test_tfidf_list(self, abc):
        docs, model = abc
        assert build_cited_tfidf(docs[0], model, ContextSpec()) == ["a", "⟨TF⟩", "b"]

    def test_tfidf_budget_term_boundary(self, abc):
        docs, model = abc
        assert build_cited_tfidf(docs[0], model, ContextSpec(cited_budget=2)) == ["a"]

    def test_entity_ranking_by_hand(self, abc):
        docs, model = abc
        ranked = rank_entities(docs[0], model)
        assert [" ".join(e) for e, _ in ranked] == ["a b", "b", "zz"]
        assert ranked[0][1] == pytest.approx((2 * math.log(3) + math.log(1.5)) / 2, abs=1e-12)
        assert ranked[1][1] == pytest.approx(math.log(1.5), abs=1e-12)
        assert ranked[2][1] == 0.0

    def test_entity_view_layout(self, abc):
        docs, model = abc
        out = build_cited_entities(docs[0], model, ContextSpec())
        # a and b are covered by entities, so nothing is backfilled
        assert out == ["a", "b", "⟨ENT⟩", "b", "⟨ENT⟩", "zz"]

    def test_no_entities_equals_tfidf(self, abc):
        docs, model = abc
        bare = Document("d1", abstract="b c")
        assert build_cited_entities(bare, model, ContextSpec()) == build_cited_tfidf(bare, model, ContextSpec())

    def test_full_entity_window_no_backfill(self, abc):
        _, model = abc
        doc = Document("e", abstract="a b c", entity_annotations=("a", "b"))
        out = build_cited_entities(doc, model, ContextSpec(term_list_size=2))
        assert "⟨TF⟩" not in out and len([t for t in out if t != "⟨ENT⟩"]) == 2


class TestAssemble:
    def test_no_target(self):
        spec = ContextSpec(principal_budget=3, cited_budget=3, target_budget=2)
        ctx = assemble(["a"], ["b"], None, TOKS, spec)
        assert ctx.tokens == ("a", "⟨SEP⟩", "b") + ("⟨PAD⟩",) * 7
        assert ctx.target_len == 0 and layout_errors(ctx, TOKS, spec) == []

    def test_exact_budget_no_padding(self):
        spec = ContextSpec(principal_budget=2, cited_budget=2, target_budget=1)
        ctx = assemble(["a", "b"], ["c", "d"], ["e"], TOKS, spec)
        assert "⟨PAD⟩" not in ctx.tokens and len(ctx.tokens) == spec.total_length

    def test_over_budget(self):
        with pytest.raises(ContextError):
            assemble(["a"] * 5, [], None, TOKS, ContextSpec(principal_budget=4))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.sampled_from("abc"), max_size=5), st.lists(st.sampled_from("def"), max_size=5),
           st.one_of(st.none(), st.lists(st.sampled_from("gh"), min_size=1, max_size=3)))
    def test_roundtrip_and_layout(self, p, c, t):
        spec = ContextSpec(principal_budget=5, cited_budget=5, target_budget=3)
        ctx = assemble(p, c, t, TOKS, spec)
        assert layout_errors(ctx, TOKS, spec) == []
        assert ctx.tokens.count("⟨SEP⟩") == 1
        assert ("⟨TGT⟩" in ctx.tokens) == bool(t)
        assert AssembledContext.from_json(ctx.to_json(3)) == ctx


def test_every_view_on_synthetic_corpus(small_corpus):
    instances, _ = build_splits(small_corpus, make_split_plan(small_corpus, 15, 15, seed=2))
    model = fit_tfidf(small_corpus)
    evals = [i for i in instances if i.split == "test"]
    for p in PRINCIPAL_VIEWS:
        for c in CITED_VIEWS:
            spec = ContextSpec(principal_view=p, cited_view=c)
            for inst in evals:
                ctx = build_context(inst, small_corpus, spec, TOKS, model)
                assert layout_errors(ctx, TOKS, spec) == []
                if c == "entities":
                    annotations = {e.lower() for e in small_corpus[inst.cited_id].entity_annotations}
                    cited = ctx.tokens[ctx.principal_len + 1: ctx.principal_len + 1 + ctx.cited_len]
                    surfaces = " ".join(cited).split(" ⟨TF⟩ ")[0].split(" ⟨ENT⟩ ")
                    assert all(s in annotations for s in surfaces)
