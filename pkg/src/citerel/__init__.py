"""Citation explanation toolkit: dataset building, conditioning contexts, retrieval, reranking and evaluation."""

from .corpus import Corpus, Document, ExplanationInstance, build_splits, load_corpus, make_split_plan
from .context import ContextSpec, SpecialTokens, build_context
from .embed import EmbeddingStore, load_embeddings, nearest_neighbors
from .metrics import EvalPair, corpus_bleu, rouge_l, rouge_n, sentence_bleu
from .rerank import MatchConfig, select_best
from .retrieval import RetrievalWeights, Retriever, TrainIndex, mert_tune
from .textkit import Tokenizer, fit_tfidf, gestalt_ratio

__version__ = "0.1.0"

__all__ = [
    "Corpus", "Document", "ExplanationInstance", "build_splits", "load_corpus", "make_split_plan",
    "ContextSpec", "SpecialTokens", "build_context",
    "EmbeddingStore", "load_embeddings", "nearest_neighbors",
    "EvalPair", "corpus_bleu", "rouge_l", "rouge_n", "sentence_bleu",
    "MatchConfig", "select_best",
    "RetrievalWeights", "Retriever", "TrainIndex", "mert_tune",
    "Tokenizer", "fit_tfidf", "gestalt_ratio",
]
