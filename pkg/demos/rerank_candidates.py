"""
Entity-based reranking
----------------------

Score sampled candidates by how well their entities line up with the cited
document's ranked entity list, then see where the picks fall between the
best and worst selections available.
"""

from citerel import build_splits, fit_tfidf, gestalt_ratio, load_corpus, make_split_plan
from citerel.analysis import oracle_bounds, rerank_curve
from citerel.rerank import RankedEntityList, mrr_of, ranked_entities
from citerel.synthetic import bundled_corpus_path, make_candidates

print(gestalt_ratio("neural network", "neural networks"))
cited = RankedEntityList(["graph parser", "beam search", "neural net"])
print(mrr_of(["graph parser", "neural net"], cited))

corpus = load_corpus(bundled_corpus_path())
instances, _ = build_splits(corpus, make_split_plan(corpus, 30, 30, seed=0))
tests = [(i, inst) for i, inst in enumerate(instances) if inst.split == "test"]
sets = make_candidates(tests, k=20, seed=0)
refs = [inst.target for _, inst in tests]
model = fit_tfidf(corpus)
entity_lists = [ranked_entities(corpus[inst.cited_id], model) for _, inst in tests]

picks, rerank = rerank_curve(sets, refs, entity_lists)
bounds = oracle_bounds(sets, refs, warm_starts=picks)
for k, lo, hi in zip(bounds.ks, bounds.lower, bounds.upper):
    print(f"k={k:<3} lower {lo:6.2f}  rerank {rerank[k]:6.2f}  upper {hi:6.2f}")
