"""
Nearest-neighbour retrieval baseline
------------------------------------

Embed every document, tune the two weights on validation, and compare the
tuned retriever with the untuned one on test.
"""

from citerel import Retriever, RetrievalWeights, TrainIndex, Tokenizer, build_splits, corpus_bleu, load_corpus
from citerel import make_split_plan, mert_tune
from citerel.embed import IVFIndex, embed_documents, nearest_neighbors
from citerel.synthetic import bundled_corpus_path

corpus = load_corpus(bundled_corpus_path())
instances, _ = build_splits(corpus, make_split_plan(corpus, 30, 30, seed=0))
store = embed_documents(corpus, dim=64)
index = TrainIndex(instances)

weights, val_bleu = mert_tune([i for i in instances if i.split == "validation"], store, index, K=64)
print("tuned", weights, f"validation BLEU {val_bleu:.2f}")

tok = Tokenizer()
retriever = Retriever(store, index, K=64)
test = [i for i in instances if i.split == "test"]
for w in (RetrievalWeights(1, 1), weights):
    pairs = [(tok(retriever.retrieve(t.principal_id, t.cited_id, w).explanation), t.target) for t in test]
    print(w, f"test BLEU {corpus_bleu(pairs):.2f}")

# the approximate index should mostly agree with the exact scan
query = store.ids[0]
exact = nearest_neighbors(store, query, K=10)
approx = IVFIndex(store, n_lists=8, n_probe=4).search(store.vector(query), K=10, exclude=[query])
print("recall@10", len(set(exact) & set(approx)) / 10)
