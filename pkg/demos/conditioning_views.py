"""
Conditioning contexts
---------------------

Every principal view crossed with every cited view, with the token budgets
printed next to the first few tokens of the assembled sequence.
"""

from citerel import ContextSpec, SpecialTokens, build_context, build_splits, fit_tfidf, load_corpus, make_split_plan
from citerel.context import CITED_VIEWS, PRINCIPAL_VIEWS
from citerel.synthetic import bundled_corpus_path

corpus = load_corpus(bundled_corpus_path())
instances, _ = build_splits(corpus, make_split_plan(corpus, 30, 30, seed=0))
model = fit_tfidf(corpus)
toks = SpecialTokens()
test = next(i for i in instances if i.split == "test")

for p in PRINCIPAL_VIEWS:
    for c in CITED_VIEWS:
        ctx = build_context(test, corpus, ContextSpec(principal_view=p, cited_view=c), toks, model)
        print(f"{p:>12} x {c:<12} j={ctx.principal_len:<4} k={ctx.cited_len:<4} m={ctx.target_len:<4}",
              " ".join(ctx.tokens[:8]))

# at inference time the target is replaced with padding
ctx = build_context(test, corpus, ContextSpec(), toks, model, with_target=False)
print(ctx.tokens[-5:])
