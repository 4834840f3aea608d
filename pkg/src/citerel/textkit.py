"""Shared text primitives: tokenization, tf-idf term scoring and gestalt similarity."""

from __future__ import annotations

import hashlib
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

CITE_TOKEN = "⟨CITE⟩"

DEFAULT_FIELDS = ("abstract", "introduction", "body")
TFIDF_FORMAT_VERSION = 1


class Tokenizer:
    """Unicode word tokenizer with an optional pluggable backend.

    In ``word`` mode text is split into runs of word characters and single
    punctuation characters. Protected surfaces (the citation placeholder by
    default) always survive as one token and are never lowercased.

    Passing ``fn`` switches to ``pluggable`` mode: ``fn(text)`` must return a
    list of string tokens (e.g. a subword tokenizer's surface pieces).
    """

    def __init__(self, lowercase: bool = True, fn: Callable[[str], list[str]] | None = None,
                 protected: Sequence[str] = (CITE_TOKEN,)):
        self.lowercase = lowercase
        self.fn = fn
        self.protected = tuple(protected)
        alternatives = [re.escape(p) for p in sorted(self.protected, key=len, reverse=True)]
        alternatives += [r"\w+", r"[^\w\s]"]
        self._pattern = re.compile("|".join(alternatives))

    @property
    def mode(self) -> str:
        return "word" if self.fn is None else "pluggable"

    def tokenize(self, text: str) -> list[str]:
        if not text:
            return []
        if self.fn is not None:
            return list(self.fn(text))
        tokens = self._pattern.findall(text)
        if self.lowercase:
            protected = set(self.protected)
            tokens = [t if t in protected else t.lower() for t in tokens]
        return tokens

    __call__ = tokenize

    def __repr__(self):
        return f"Tokenizer(mode={self.mode!r}, lowercase={self.lowercase})"


def is_term(token: str) -> bool:
    """Whether a token counts as a tf-idf unigram (has a letter or digit)."""
    return token != CITE_TOKEN and any(ch.isalnum() for ch in token)


def document_text(doc, fields: Sequence[str] = DEFAULT_FIELDS) -> str:
    return doc.text(fields)


@dataclass(frozen=True)
class TfidfModel:
    n_docs: int
    doc_freq: dict = field(repr=False)
    fields: tuple = DEFAULT_FIELDS

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.n_docs}|{','.join(self.fields)}\n".encode())
        for term in sorted(self.doc_freq):
            h.update(f"{term}\t{self.doc_freq[term]}\n".encode())
        return h.hexdigest()

    def idf(self, term: str) -> float:
        # terms unseen at fit time get df = 1
        return math.log(self.n_docs / self.doc_freq.get(term, 1))

    def to_json(self) -> dict:
        return {
            "version": TFIDF_FORMAT_VERSION,
            "n_docs": self.n_docs,
            "fields": list(self.fields),
            "doc_freq": dict(sorted(self.doc_freq.items())),
        }

    @classmethod
    def from_json(cls, data: dict) -> "TfidfModel":
        if data.get("version") != TFIDF_FORMAT_VERSION:
            raise ValueError(f"unsupported tf-idf sidecar version: {data.get('version')!r}")
        return cls(int(data["n_docs"]), {k: int(v) for k, v in data["doc_freq"].items()},
                   tuple(data["fields"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), ensure_ascii=False, sort_keys=True))

    @classmethod
    def load(cls, path) -> "TfidfModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def fit_tfidf(documents: Iterable, fields: Sequence[str] = DEFAULT_FIELDS,
              tokenizer: Tokenizer | None = None) -> TfidfModel:
    """Count, for every unigram, the number of documents containing it."""
    tokenizer = tokenizer or Tokenizer()
    df: Counter = Counter()
    n = 0
    for doc in documents:
        n += 1
        df.update({t for t in tokenizer(document_text(doc, fields)) if is_term(t)})
    if n == 0:
        raise ValueError("cannot fit tf-idf on an empty corpus")
    return TfidfModel(n, dict(df), tuple(fields))


def term_counts(doc, model: TfidfModel, tokenizer: Tokenizer | None = None) -> Counter:
    tokenizer = tokenizer or Tokenizer()
    return Counter(t for t in tokenizer(document_text(doc, model.fields)) if is_term(t))


def score_terms(model: TfidfModel, doc, tokenizer: Tokenizer | None = None) -> list[tuple[str, float]]:
    """Rank the document's unigrams by ``tf * ln(N / df)``.

    Ties are broken by term, ascending.
    """
    counts = term_counts(doc, model, tokenizer)
    scored = [(t, c * model.idf(t)) for t, c in counts.items()]
    scored.sort(key=lambda ts: (-ts[1], ts[0]))
    return scored


def longest_match(a: str, b: str, alo: int, ahi: int, blo: int, bhi: int) -> tuple[int, int, int]:
    """Longest common block of ``a[alo:ahi]`` and ``b[blo:bhi]``.

    Returns ``(i, j, size)``; among equally long blocks the one starting
    earliest in ``a`` wins, then earliest in ``b``.
    """
    positions: dict[str, list[int]] = {}
    for j in range(blo, bhi):
        positions.setdefault(b[j], []).append(j)
    best_i, best_j, best = alo, blo, 0
    # run[j] = length of the common block ending at a[i-1], b[j]
    run: dict[int, int] = {}
    for i in range(alo, ahi):
        new_run: dict[int, int] = {}
        for j in positions.get(a[i], ()):
            k = run.get(j - 1, 0) + 1
            new_run[j] = k
            if k > best:
                best_i, best_j, best = i - k + 1, j - k + 1, k
        run = new_run
    return best_i, best_j, best


def matched_characters(a: str, b: str) -> int:
    total = 0
    stack = [(0, len(a), 0, len(b))]
    while stack:
        alo, ahi, blo, bhi = stack.pop()
        i, j, k = longest_match(a, b, alo, ahi, blo, bhi)
        if k == 0:
            continue
        total += k
        if alo < i and blo < j:
            stack.append((alo, i, blo, j))
        if i + k < ahi and j + k < bhi:
            stack.append((i + k, ahi, j + k, bhi))
    return total


def gestalt_ratio(a: str, b: str) -> float:
    """Ratcliff-Obershelp similarity ``2M / (|a| + |b|)`` of two strings, case-insensitive."""
    a, b = a.lower(), b.lower()
    total = len(a) + len(b)
    if total == 0:
        return 1.0
    return 2.0 * matched_characters(a, b) / total
