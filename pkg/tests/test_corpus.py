import json

import pytest

from citerel import synthetic
from citerel.corpus import (
    CorpusError,
    ExplanationInstance,
    SplitPlan,
    build_splits,
    count_citations,
    load_corpus,
    make_split_plan,
    mask_citations,
    parse_corpus,
    read_instances,
    write_instances,
)
from citerel.textkit import CITE_TOKEN


def record(doc_id, cites=(), abstract="An abstract.", introduction="An introduction.", **kw):
    citations = [{"cited_id": c, "sentence": s, "para": 0, "sent": i} for i, (c, s) in enumerate(cites)]
    return {"doc_id": doc_id, "title": doc_id, "abstract": abstract, "introduction": introduction,
            "body": ["Body text."], "citations": citations, **kw}


def ten_doc_records():
    """d0 is the held-out principal; every other edge type appears once or twice."""
    recs = [record(f"d{i}") for i in range(10)]
    recs[0] = record("d0", [("d1", "We extend [CITE:d1]."), ("d2", "Unlike [CITE:d2], we win.")])
    recs[3] = record("d3", [("d0", "As in [CITE:d0]."), ("d4", "See [CITE:d4] for details.")])
    recs[5] = record("d5", [("d6", "Both [CITE:d6] and [CITE:d7] agree."),
                            ("d7", "Both [CITE:d6] and [CITE:d7] agree.")])
    recs[8] = record("d8", [("ghost", "Missing [CITE:ghost].")])
    recs[9] = record("d9", [("d9", "We previously [CITE:d9].")])
    return recs


def lines(recs):
    return [json.dumps(r) for r in recs]


def test_load_three_docs(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text("\n".join(lines([record("a"), record("b"), record("c")])) + "\n")
    assert len(load_corpus(path)) == 3


def test_duplicate_id_named():
    with pytest.raises(CorpusError, match="'a'"):
        parse_corpus(lines([record("a"), record("a")]))


def test_malformed_line_number():
    with pytest.raises(CorpusError, match="line 2"):
        parse_corpus([json.dumps(record("a")), "{not json"])


def test_missing_field():
    rec = record("a")
    del rec["introduction"]
    with pytest.raises(CorpusError, match="introduction"):
        parse_corpus(lines([rec]))


def test_empty_abstract_allowed():
    corpus = parse_corpus(lines([record("a", abstract="", introduction="")]))
    assert corpus["a"].abstract == ""


def test_missing_cited_dropped():
    corpus = parse_corpus(lines([record("A", [("Z", "We use [CITE:Z].")])]))
    assert corpus.stats.dropped_missing == 1
    assert corpus.edges == []


def test_mask():
    assert mask_citations("We follow [CITE:x].") == f"We follow {CITE_TOKEN}."
    assert mask_citations("No citations here.") == "No citations here."
    two = "Both [CITE:a] and [CITE:b]."
    assert mask_citations(two) == f"Both {CITE_TOKEN} and {CITE_TOKEN}."
    assert count_citations(two) == 2


def test_ten_doc_hand_counts():
    corpus = parse_corpus(lines(ten_doc_records()))
    assert corpus.stats.edges_total == 8
    assert (corpus.stats.dropped_missing, corpus.stats.dropped_self, corpus.stats.dropped_multi) == (1, 1, 2)
    plan = SplitPlan({"d0"}, set())
    instances, stats = build_splits(corpus, plan)
    assert sorted((i.principal_id, i.cited_id, i.split) for i in instances) == [
        ("d0", "d1", "test"), ("d0", "d2", "test"), ("d3", "d4", "train")]
    assert stats.dropped_leakage == 1
    assert stats.resolved == 6
    assert stats.conserved()


def test_targets_masked_and_tokenized():
    corpus = parse_corpus(lines(ten_doc_records()))
    instances, _ = build_splits(corpus, SplitPlan({"d0"}, set()))
    first = [i for i in instances if i.cited_id == "d1"][0]
    assert first.target == ("we", "extend", CITE_TOKEN, ".")


def test_truncation_keeps_head():
    long = " ".join(f"w{i}" for i in range(150)) + " [CITE:b]."
    corpus = parse_corpus(lines([record("a", [("b", long)]), record("b")]))
    (inst,), _ = build_splits(corpus, SplitPlan(set(), set()))
    assert len(inst.target) == 100
    assert inst.target[:3] == ("w0", "w1", "w2")


def test_all_held_out_means_no_train():
    corpus = parse_corpus(lines(ten_doc_records()))
    citing = {e.citing_id for e in corpus.edges}
    instances, stats = build_splits(corpus, SplitPlan(citing, set()))
    assert not [i for i in instances if i.split == "train"]
    assert stats.conserved()


def test_overlapping_plan_rejected():
    corpus = parse_corpus(lines(ten_doc_records()))
    with pytest.raises(CorpusError):
        build_splits(corpus, SplitPlan({"d0"}, {"d0"}))
    with pytest.raises(CorpusError):
        build_splits(corpus, SplitPlan({"nope"}, set()))


def test_no_context_principal_dropped():
    recs = [record("a", [("b", "See [CITE:b].")], abstract="", introduction=""), record("b")]
    instances, stats = build_splits(parse_corpus(lines(recs)), SplitPlan(set(), set()))
    assert instances == [] and stats.dropped_no_context == 1 and stats.conserved()


def test_split_plan_deterministic(small_corpus):
    a = make_split_plan(small_corpus, 10, 10, seed=4)
    b = make_split_plan(small_corpus, 10, 10, seed=4)
    assert a == b
    assert not a.test_principals & a.validation_principals
    with pytest.raises(CorpusError):
        make_split_plan(small_corpus, 10**6, 0)


def test_instances_roundtrip(tmp_path, small_corpus):
    instances, _ = build_splits(small_corpus, make_split_plan(small_corpus, 5, 5, seed=1))
    path = tmp_path / "i.jsonl"
    write_instances(instances, path)
    assert read_instances(path) == instances
    rec = json.loads(path.read_text().splitlines()[0])
    assert {"principal", "cited", "target", "split"} <= rec.keys()
    assert ExplanationInstance.from_json(rec) == instances[0]


def test_synthetic_hygiene_1k():
    corpus = synthetic.make_corpus(1000, seed=12)
    plan = make_split_plan(corpus, 60, 60, seed=12)
    instances, stats = build_splits(corpus, plan)
    assert stats.conserved()
    assert all(i.cited_id not in plan.held_out for i in instances if i.split == "train")
    assert all(i.principal_id in plan.test_principals for i in instances if i.split == "test")
    assert all(i.principal_id in plan.validation_principals for i in instances if i.split == "validation")
