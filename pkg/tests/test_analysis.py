import random

import pytest

import oracles
from citerel import synthetic
from citerel.analysis import (
    AnalysisError,
    BoundCurve,
    autocomplete_eval,
    build_report,
    exhaustive_bounds,
    oracle_bounds,
    render_text,
    report_json,
    rerank_curve,
)
from citerel.corpus import ExplanationInstance
from citerel.metrics import EvalPair, JudgmentRecord
from citerel.rerank import CandidateSet, RankedEntityList

VOCAB = "a b c d e f".split()


def random_sets(seed, n=5, k=4):
    rng = random.Random(seed)
    refs = [[rng.choice(VOCAB) for _ in range(rng.randint(4, 9))] for _ in range(n)]
    sets = [CandidateSet(i, [" ".join(t if rng.random() < rng.random() else rng.choice(VOCAB) for t in r)
                             for _ in range(k)]) for i, r in enumerate(refs)]
    return sets, refs


def test_k1_collapses():
    sets, refs = random_sets(0)
    b = oracle_bounds(sets, refs, ks=(1,))
    first = oracles.bleu([(s.candidates[0].split(), r) for s, r in zip(sets, refs)])
    assert b.upper == b.lower == (pytest.approx(first, abs=1e-9),)


@pytest.mark.parametrize("seed", range(8))
def test_five_instance_exhaustive(seed):
    sets, refs = random_sets(seed)
    hi, lo = exhaustive_bounds(sets, refs, 4)
    b = oracle_bounds(sets, refs, ks=(4,))
    assert b.upper[0] == pytest.approx(hi, abs=1e-12)
    assert b.lower[0] == pytest.approx(lo, abs=1e-12)


def test_monotone_nested_pools():
    for seed in range(5):
        sets, refs = random_sets(seed, n=12, k=20)
        b = oracle_bounds(sets, refs)
        assert b.ks == (1, 2, 5, 10, 20)
        assert all(x <= y for x, y in zip(b.upper, b.upper[1:]))
        assert all(x >= y for x, y in zip(b.lower, b.lower[1:]))


def test_warm_starts_bracket_known_selection():
    sets, refs = random_sets(3, n=10, k=10)
    rng = random.Random(0)
    known = {k: [rng.randrange(k) for _ in sets] for k in (2, 5, 10)}
    b = oracle_bounds(sets, refs, ks=(2, 5, 10), warm_starts=known)
    for i, k in enumerate(b.ks):
        value = oracles.bleu([(s.candidates[c].split(), r) for s, c, r in zip(sets, known[k], refs)])
        assert b.lower[i] <= value + 1e-9 and value <= b.upper[i] + 1e-9
    with pytest.raises(AnalysisError):
        oracle_bounds(sets, refs, ks=(2,), warm_starts={2: [5] * len(sets)})


def test_rerank_within_bounds():
    sets, refs = random_sets(9, n=15, k=20)
    cited = [RankedEntityList(["a b", "c d", "e f"])] * len(sets)
    picks, bleu = rerank_curve(sets, refs, cited)
    b = oracle_bounds(sets, refs, warm_starts=picks)
    for i, k in enumerate(b.ks):
        assert b.lower[i] <= bleu[k] <= b.upper[i]


def test_insufficient_candidates():
    sets, refs = random_sets(1, k=3)
    with pytest.raises(AnalysisError):
        oracle_bounds(sets, refs, ks=(1, 5))


def test_bound_curve_invariant():
    with pytest.raises(AnalysisError):
        BoundCurve((1,), (1.0,), (2.0,))


class TestAutocomplete:
    def test_suffix_is_100(self):
        gold = "we extend their parser to new languages".split()
        assert autocomplete_eval([(gold, "parser to new languages")], prefix_len=3).bleu == 100.0

    def test_empty_completion(self):
        gold = "we extend their parser to new languages".split()
        assert autocomplete_eval([(gold, "")]).bleu == 0.0

    def test_short_skipped(self):
        gold = "we extend their parser to new languages".split()
        res = autocomplete_eval([(["a", "b"], "x"), (gold, "parser to new languages")])
        assert (res.n_scored, res.n_skipped) == (1, 1)
        with pytest.raises(AnalysisError):
            autocomplete_eval([(["a"], "x")])


def pairs_for(texts, golds, acl=None):
    return [EvalPair(t.split(), g.split(), i, bool(acl and acl[i])) for i, (t, g) in enumerate(zip(texts, golds))]


GOLD = ["we build on their graph parser", "their corpus is large and clean", "we follow the beam search setup"]
SYS_A = ["we build on the graph parser", "their corpus is large", "we follow a beam search"]
SYS_B = ["a parser", "the corpus", "beam search setup"]


def test_report_cells_recomputable():
    systems = {"a": pairs_for(SYS_A, GOLD, [1, 0, 1]), "b": pairs_for(SYS_B, GOLD)}
    report = build_report(systems, seed=1, iterations=20)
    row = report["systems"]["a"]
    refs = [(t.split(), g.split()) for t, g in zip(SYS_A, GOLD)]
    assert row["bleu"] == pytest.approx(oracles.bleu(refs), abs=1e-9)
    assert row["acl_bleu"] == pytest.approx(oracles.bleu(refs[::2]), abs=1e-9)
    assert row["rouge1"] == pytest.approx(oracles.rouge_n(refs, 1)[2], abs=1e-12)
    assert row["rouge2"] == pytest.approx(oracles.rouge_n(refs, 2)[2], abs=1e-12)
    assert row["rougeL"] == pytest.approx(oracles.rouge_l(refs)[2], abs=1e-12)
    assert report["systems"]["b"]["acl_bleu"] is None
    assert set(report["significance"]) == {"a > b", "b > a"}


def test_single_system_and_determinism():
    systems = {"only": pairs_for(SYS_A, GOLD)}
    a = report_json(build_report(systems, seed=3))
    b = report_json(build_report(systems, seed=3))
    assert a == b
    report = build_report(systems, seed=3)
    assert list(report["systems"]) == ["only"] and report["significance"] == {}
    assert "only" in render_text(report)


def test_identical_systems_not_significant():
    systems = {"x": pairs_for(SYS_A, GOLD), "y": pairs_for(SYS_A, GOLD)}
    cell = build_report(systems, iterations=30)["significance"]["x > y"]
    assert cell["mean_diff"] == 0.0 and cell["p"] == 1.0


def test_empty_report():
    with pytest.raises(AnalysisError):
        build_report({})


def test_judgment_section():
    instances = [ExplanationInstance("s", "c", tuple(g.split()), "test") for g in GOLD]
    refs = {i: inst.target for i, inst in enumerate(instances)}
    outputs = {"a": dict(enumerate(SYS_A)), "b": dict(enumerate(SYS_B))}
    rows = [JudgmentRecord(r["instance"], r["system"], r["dimension"], r["verdict"])
            for r in synthetic.make_judgments(outputs, refs, seed=0, judges_per_item=4)]
    report = build_report({"a": pairs_for(SYS_A, GOLD), "b": pairs_for(SYS_B, GOLD)}, judgments=rows)
    assert set(report["human"]["correlation"]) == {"bleu", "rougeL"}
    assert all(0 <= c["yes_pct"] <= 100 for c in report["human"]["rates"].values())
