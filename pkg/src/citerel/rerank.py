"""Entity-based reranking of generated candidate sentences by mean reciprocal rank."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .context import rank_entities
from .textkit import Tokenizer, gestalt_ratio, is_term

EXTRACTORS = ("ingested", "ngram_scan")


class RerankError(ValueError):
    pass


@dataclass(frozen=True)
class MatchConfig:
    threshold: float = 0.7
    extractor: str = "ngram_scan"
    ngram_max: int = 6

    def __post_init__(self):
        if not 0 < self.threshold <= 1:
            raise RerankError(f"threshold must be in (0, 1], got {self.threshold}")
        if self.extractor not in EXTRACTORS:
            raise RerankError(f"unknown extractor {self.extractor!r}")
        if self.ngram_max < 1:
            raise RerankError("ngram_max must be >= 1")


@dataclass(frozen=True)
class CandidateSet:
    instance_ref: int
    candidates: tuple
    candidate_entities: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if not self.candidates:
            raise RerankError(f"instance {self.instance_ref}: a candidate set needs at least one sentence")
        if self.candidate_entities is not None:
            ents = tuple(tuple(e) for e in self.candidate_entities)
            if len(ents) != len(self.candidates):
                raise RerankError(f"instance {self.instance_ref}: {len(ents)} entity lists "
                                  f"for {len(self.candidates)} candidates")
            object.__setattr__(self, "candidate_entities", ents)

    def __len__(self):
        return len(self.candidates)

    def to_json(self) -> dict:
        rec = {"instance": self.instance_ref, "candidates": list(self.candidates)}
        if self.candidate_entities is not None:
            rec["candidate_entities"] = [list(e) for e in self.candidate_entities]
        return rec

    @classmethod
    def from_json(cls, rec: dict) -> "CandidateSet":
        return cls(int(rec["instance"]), rec["candidates"], rec.get("candidate_entities"))


class RankedEntityList:
    """Cited-document entity surfaces, most important first, deduplicated case-insensitively."""

    def __init__(self, entities: Sequence[str]):
        seen, kept = set(), []
        for e in entities:
            key = e.lower()
            if key not in seen:
                seen.add(key)
                kept.append(e)
        self.entities = tuple(kept)

    def __len__(self):
        return len(self.entities)

    def __iter__(self):
        return iter(self.entities)

    def __repr__(self):
        return f"RankedEntityList({list(self.entities)!r})"


def read_candidates(path) -> list[CandidateSet]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(CandidateSet.from_json(json.loads(line)))
            except (KeyError, TypeError, json.JSONDecodeError) as exc:
                raise RerankError(f"candidates line {lineno}: {exc}") from None
    return out


def write_candidates(sets: Sequence[CandidateSet], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sets:
            fh.write(json.dumps(s.to_json(), ensure_ascii=False) + "\n")


def _could_reach(a: str, b: str, threshold: float) -> bool:
    """Cheap upper bounds on the gestalt ratio (length, then character multiset)."""
    la, lb = len(a), len(b)
    if la + lb == 0:
        return True
    if 2.0 * min(la, lb) / (la + lb) < threshold:
        return False
    common = sum((Counter(a) & Counter(b)).values())
    return 2.0 * common / (la + lb) >= threshold


@lru_cache(maxsize=1 << 16)
def _ratio_if_above(a: str, b: str, threshold: float) -> float:
    a, b = a.lower(), b.lower()
    if not _could_reach(a, b, threshold):
        return 0.0
    return gestalt_ratio(a, b)


def match_rank(q: str, cited: RankedEntityList, cfg: MatchConfig = MatchConfig()) -> int | None:
    """1-based position of the first cited entity matching ``q``, or None."""
    for j, e in enumerate(cited, 1):
        if _ratio_if_above(q, e, cfg.threshold) >= cfg.threshold:
            return j
    return None


def candidate_entities(candidate: str, cited: RankedEntityList, cfg: MatchConfig = MatchConfig(),
                       annotations: Sequence[str] | None = None,
                       tokenizer: Tokenizer | None = None) -> list[str]:
    """Entities mentioned by a candidate sentence.

    ``ingested`` mode returns the externally supplied ``annotations``.
    ``ngram_scan`` keeps every n-gram whose best ratio against a cited entity
    clears the threshold, retaining only the best n-gram per cited entity.
    """
    if cfg.extractor == "ingested":
        if annotations is None:
            raise RerankError("ingested extractor needs candidate entity annotations")
        return list(annotations)

    tokens = (tokenizer or Tokenizer())(candidate)
    best: dict[int, tuple[float, int, str]] = {}
    order = 0
    for start in range(len(tokens)):
        for n in range(1, cfg.ngram_max + 1):
            gram = tokens[start:start + n]
            if len(gram) < n:
                break
            if not any(is_term(t) for t in gram):
                continue
            text = " ".join(gram)
            top_j, top_r = None, -1.0
            for j, e in enumerate(cited):
                r = _ratio_if_above(text, e, cfg.threshold)
                if r > top_r:
                    top_j, top_r = j, r
            if top_j is not None and top_r >= cfg.threshold:
                if top_j not in best or top_r > best[top_j][0]:
                    best[top_j] = (top_r, order, text)
            order += 1
    return [text for _, _, text in sorted(best.values(), key=lambda v: v[1])]


def mrr_of(entities: Sequence[str], cited: RankedEntityList, cfg: MatchConfig = MatchConfig()) -> float:
    if not entities:
        return 0.0
    ranks = [match_rank(q, cited, cfg) for q in entities]
    return sum(1.0 / r for r in ranks if r is not None) / len(entities)


def mrr(candidate: str, cited: RankedEntityList, cfg: MatchConfig = MatchConfig(),
        annotations: Sequence[str] | None = None, tokenizer: Tokenizer | None = None) -> float:
    """Mean reciprocal rank of a candidate's entities; unmatched entities count 0 and no entities gives 0."""
    return mrr_of(candidate_entities(candidate, cited, cfg, annotations, tokenizer), cited, cfg)


def candidate_mrrs(cset: CandidateSet, cited: RankedEntityList, cfg: MatchConfig = MatchConfig(),
                   tokenizer: Tokenizer | None = None) -> list[float]:
    ents = cset.candidate_entities
    return [mrr(c, cited, cfg, None if ents is None else ents[i], tokenizer)
            for i, c in enumerate(cset.candidates)]


def select_best(cset: CandidateSet, cited: RankedEntityList, cfg: MatchConfig = MatchConfig(),
                tokenizer: Tokenizer | None = None) -> tuple[int, float]:
    """Index and MRR of the highest-scoring candidate; the earliest candidate wins ties."""
    scores = candidate_mrrs(cset, cited, cfg, tokenizer)
    best = max(range(len(scores)), key=lambda i: (scores[i], -i))
    return best, scores[best]


def ranked_entities(doc, model, tokenizer: Tokenizer | None = None) -> RankedEntityList:
    """The cited document's annotations ranked by mean tf-idf."""
    return RankedEntityList([" ".join(e) for e, _ in rank_entities(doc, model, tokenizer)])
