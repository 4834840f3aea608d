"""Nearest-neighbour retrieval baseline over training citation pairs."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import ExplanationInstance
from .embed import EmbeddingStore, nearest_to_vector
from .metrics import EvalPair, corpus_bleu
from .textkit import Tokenizer

DEFAULT_K = 64


class RetrievalError(ValueError):
    pass


@dataclass(frozen=True)
class RetrievalWeights:
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or not self.alpha + self.beta > 0:
            raise RetrievalError(f"weights must be non-negative with a positive sum: {self}")


@dataclass(frozen=True)
class RetrievalResult:
    explanation: str
    neighbor_principal: str
    neighbor_cited: str
    score: float

    def to_json(self, instance: int) -> dict:
        return {"instance": instance, "text": self.explanation, "ns": self.neighbor_principal,
                "nc": self.neighbor_cited, "score": self.score}


class TrainIndex:
    """Training citation pairs grouped by cited document.

    For every (citing, cited) pair only the first citing sentence by
    document location is kept.
    """

    def __init__(self, instances: Sequence[ExplanationInstance]):
        first: dict = {}
        for inst in instances:
            if inst.split != "train":
                continue
            key = (inst.cited_id, inst.principal_id)
            if key not in first or inst.location < first[key].location:
                first[key] = inst
        if not first:
            raise RetrievalError("training index is empty")
        self.citers: dict[str, list[str]] = defaultdict(list)
        self.sentence: dict[tuple[str, str], str] = {}
        for (cited, citing), inst in sorted(first.items()):
            self.citers[cited].append(citing)
            self.sentence[cited, citing] = inst.target_text

    @property
    def cited_ids(self) -> list[str]:
        return sorted(self.citers)

    def pairs(self) -> list[tuple[str, str]]:
        """All ``(N_S, N_C)`` pairs."""
        return [(ns, nc) for nc in self.cited_ids for ns in self.citers[nc]]


@dataclass
class CandidateTable:
    """Candidate pairs for one query with their two cosine terms, in (N_C, N_S) order."""
    ns: list
    nc: list
    cos_s: np.ndarray
    cos_c: np.ndarray

    def best(self, w: RetrievalWeights) -> int:
        scores = w.alpha * self.cos_s + w.beta * self.cos_c
        # rows are sorted by (N_C, N_S), so argmax's first-hit rule is the tie-break
        return int(np.argmax(scores))


class Retriever:
    def __init__(self, store: EmbeddingStore, train_index: TrainIndex, K: int = DEFAULT_K):
        missing = [d for d in train_index.cited_ids if d not in store]
        if missing:
            raise RetrievalError(f"{len(missing)} training cited documents lack embeddings, e.g. {missing[0]!r}")
        self.store = store
        self.index = train_index
        self.K = K
        self._cited_store = store.subset(train_index.cited_ids)

    def candidates(self, S: str, C: str) -> CandidateTable:
        s_vec, c_vec = self.store.vector(S), self.store.vector(C)
        neighbors = nearest_to_vector(self._cited_store, c_vec, self.K)
        ns, nc, cos_c = [], [], []
        for nc_id, cos in sorted(neighbors):
            for ns_id in self.index.citers[nc_id]:
                if ns_id in self.store:
                    ns.append(ns_id)
                    nc.append(nc_id)
                    cos_c.append(cos)
        if not ns:
            raise RetrievalError(f"no candidate pairs for ({S!r}, {C!r})")
        cos_s = self.store.matrix[self.store.rows(ns)] @ s_vec
        return CandidateTable(ns, nc, cos_s, np.array(cos_c))

    def retrieve(self, S: str, C: str, w: RetrievalWeights = RetrievalWeights()) -> RetrievalResult:
        table = self.candidates(S, C)
        i = table.best(w)
        ns, nc = table.ns[i], table.nc[i]
        score = float(w.alpha * table.cos_s[i] + w.beta * table.cos_c[i])
        return RetrievalResult(self.index.sentence[nc, ns], ns, nc, score)


def retrieve(S: str, C: str, store: EmbeddingStore, train_index: TrainIndex,
             w: RetrievalWeights = RetrievalWeights(), K: int = DEFAULT_K) -> RetrievalResult:
    """Return the training sentence whose (N_S, N_C) pair maximizes ``a*cos(S,N_S) + b*cos(C,N_C)``."""
    return Retriever(store, train_index, K).retrieve(S, C, w)


def default_grid() -> list[RetrievalWeights]:
    """beta fixed at 1; alpha = 0 and log-spaced over [1/16, 16]."""
    return [RetrievalWeights(0.0, 1.0)] + [RetrievalWeights(2.0**e, 1.0) for e in range(-4, 5)]


def mert_tune(validation: Sequence[ExplanationInstance], store: EmbeddingStore, train_index: TrainIndex,
              K: int = DEFAULT_K, grid: Sequence[RetrievalWeights] | None = None,
              tokenizer: Tokenizer | None = None) -> tuple[RetrievalWeights, float]:
    """Grid search for the weights maximizing validation corpus BLEU (first grid point wins ties)."""
    if not validation:
        raise RetrievalError("validation set is empty")
    grid = list(grid) if grid is not None else default_grid()
    if not grid:
        raise RetrievalError("weight grid is empty")
    tokenizer = tokenizer or Tokenizer()
    retriever = Retriever(store, train_index, K)
    tables = [retriever.candidates(inst.principal_id, inst.cited_id) for inst in validation]
    tokenized: dict = {}

    def hyp(table: CandidateTable, i: int):
        key = (table.nc[i], table.ns[i])
        if key not in tokenized:
            tokenized[key] = tokenizer(train_index.sentence[key])
        return tokenized[key]

    best_w, best_bleu = None, -math.inf
    for w in grid:
        pairs = [EvalPair(hyp(t, t.best(w)), inst.target) for t, inst in zip(tables, validation)]
        bleu = corpus_bleu(pairs)
        if bleu > best_bleu:
            best_w, best_bleu = w, bleu
    return best_w, best_bleu
