"""Conditioning-context construction: document views, term lists and token layout."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from typing import Sequence

from .corpus import Corpus, Document, ExplanationInstance, count_citations, mask_citations
from .textkit import TfidfModel, Tokenizer, is_term, score_terms, term_counts

PRINCIPAL_VIEWS = ("abstract", "introduction")
CITED_VIEWS = ("abstract", "introduction", "sampled", "tfidf", "entities")

_SENTENCE_END = re.compile(r"(?<=[.!?])\s+(?=\S)")


class ContextError(ValueError):
    pass


@dataclass(frozen=True)
class SpecialTokens:
    sep_principal: str = "⟨SEP⟩"
    sep_target: str = "⟨TGT⟩"
    sep_tfidf: str = "⟨TF⟩"
    sep_entity: str = "⟨ENT⟩"
    pad: str = "⟨PAD⟩"

    @property
    def surfaces(self) -> tuple[str, ...]:
        return (self.sep_principal, self.sep_target, self.sep_tfidf, self.sep_entity, self.pad)

    def validate(self, tokenizer: Tokenizer | None = None) -> None:
        tokenizer = tokenizer or Tokenizer()
        if len(set(self.surfaces)) != len(self.surfaces):
            raise ContextError(f"special token surfaces must be distinct: {self.surfaces}")
        for s in self.surfaces:
            if not s or tokenizer(s) == [s]:
                raise ContextError(f"special token {s!r} can be produced by the tokenizer")

    @classmethod
    def from_config(cls, block: dict | None) -> "SpecialTokens":
        return cls(**(block or {}))


@dataclass(frozen=True)
class ContextSpec:
    principal_view: str = "abstract"
    cited_view: str = "abstract"
    principal_budget: int = 450
    cited_budget: int = 450
    target_budget: int = 100
    term_list_size: int = 100
    sample_seed: int = 0

    def __post_init__(self):
        if self.principal_view not in PRINCIPAL_VIEWS:
            raise ContextError(f"unknown principal view {self.principal_view!r}")
        if self.cited_view not in CITED_VIEWS:
            raise ContextError(f"unknown cited view {self.cited_view!r}")
        if min(self.principal_budget, self.cited_budget, self.target_budget, self.term_list_size) <= 0:
            raise ContextError("budgets and term_list_size must be positive")

    @property
    def total_length(self) -> int:
        return self.principal_budget + self.cited_budget + self.target_budget + 2


@dataclass(frozen=True)
class AssembledContext:
    tokens: tuple
    principal_len: int
    cited_len: int
    target_len: int = 0

    def to_json(self, instance: int | None = None) -> dict:
        rec = {} if instance is None else {"instance": instance}
        rec.update(tokens=list(self.tokens), j=self.principal_len, k=self.cited_len, m=self.target_len)
        return rec

    @classmethod
    def from_json(cls, rec: dict) -> "AssembledContext":
        return cls(tuple(rec["tokens"]), rec["j"], rec["k"], rec["m"])


def split_sentences(text: str) -> list[str]:
    return [s for s in _SENTENCE_END.split(text.strip()) if s] if text.strip() else []


def build_principal_view(doc: Document, instance: ExplanationInstance | None, spec: ContextSpec,
                         tokenizer: Tokenizer | None = None) -> list[str]:
    """Budgeted prefix of the principal's chosen field with the target sentence removed."""
    tokenizer = tokenizer or Tokenizer()
    view = spec.principal_view
    text = getattr(doc, view, None)
    if not isinstance(text, str):
        raise ContextError(f"document {doc.doc_id!r} has no {view!r} field")
    text = mask_citations(text)
    if instance is not None and instance.sentence:
        text = text.replace(mask_citations(instance.sentence), " ")
    return tokenizer(text)[: spec.principal_budget]


def document_sentences(doc: Document) -> list[str]:
    """All raw sentences of a document in reading order."""
    parts = [doc.abstract, doc.introduction, *doc.body_paragraphs]
    return [s for part in parts for s in split_sentences(part)]


def build_cited_sentences(doc: Document, spec: ContextSpec,
                          tokenizer: Tokenizer | None = None) -> list[str]:
    tokenizer = tokenizer or Tokenizer()
    view = spec.cited_view
    if view in ("abstract", "introduction"):
        return tokenizer(doc.field_text(view))[: spec.cited_budget]
    if view != "sampled":
        raise ContextError(f"{view!r} is not a sentence-based view")

    eligible = [(i, s) for i, s in enumerate(document_sentences(doc)) if count_citations(s) == 0]
    if not eligible:
        raise ContextError(f"document {doc.doc_id!r} has no sentence without a citation")
    order = list(range(len(eligible)))
    random.Random(f"{spec.sample_seed}:{doc.doc_id}").shuffle(order)
    chosen, filled = [], 0
    for idx in order:
        if filled >= spec.cited_budget:
            break
        toks = tokenizer(eligible[idx][1])
        chosen.append((eligible[idx][0], toks))
        filled += len(toks)
    chosen.sort()
    return [t for _, toks in chosen for t in toks][: spec.cited_budget]


def _fit_list(items: Sequence[tuple[str | None, list[str]]], budget: int) -> list[str]:
    """Join (separator, tokens) items, stopping at the last item that fits whole."""
    out: list[str] = []
    for sep, toks in items:
        piece = ([sep] if sep and out else []) + toks
        if len(out) + len(piece) > budget:
            break
        out.extend(piece)
    return out


def build_cited_tfidf(doc: Document, model: TfidfModel, spec: ContextSpec,
                      toks: SpecialTokens = SpecialTokens(), tokenizer: Tokenizer | None = None) -> list[str]:
    terms = [t for t, _ in score_terms(model, doc, tokenizer)[: spec.term_list_size]]
    return _fit_list([(toks.sep_tfidf, [t]) for t in terms], spec.cited_budget)


def rank_entities(doc: Document, model: TfidfModel,
                  tokenizer: Tokenizer | None = None) -> list[tuple[tuple, float]]:
    """Deduplicated entity annotations ordered by mean tf-idf of their terms.

    Returns ``(tokens, score)`` pairs; ties are broken by surface text.
    """
    tokenizer = tokenizer or Tokenizer()
    counts = term_counts(doc, model, tokenizer)
    seen, ranked = set(), []
    for surface in doc.entity_annotations or ():
        ent = tuple(tokenizer(surface))
        key = tuple(t.lower() for t in ent)
        if not ent or key in seen:
            continue
        seen.add(key)
        terms = [t for t in ent if is_term(t)]
        score = sum(counts.get(t, 0) * model.idf(t) for t in terms) / len(terms) if terms else 0.0
        ranked.append((ent, score))
    ranked.sort(key=lambda es: (-es[1], " ".join(es[0])))
    return ranked


def build_cited_entities(doc: Document, model: TfidfModel, spec: ContextSpec,
                         toks: SpecialTokens = SpecialTokens(), tokenizer: Tokenizer | None = None) -> list[str]:
    """Entity list followed by tf-idf backfill unigrams.

    With no annotations this is exactly the tf-idf list.
    """
    entities = [list(e) for e, _ in rank_entities(doc, model, tokenizer)][: spec.term_list_size]
    covered = {t for e in entities for t in e}
    n_backfill = spec.term_list_size - len(entities)
    backfill = [t for t, _ in score_terms(model, doc, tokenizer) if t not in covered][:n_backfill]
    items = [(toks.sep_entity, e) for e in entities] + [(toks.sep_tfidf, [t]) for t in backfill]
    return _fit_list(items, spec.cited_budget)


def build_cited_view(doc: Document, spec: ContextSpec, model: TfidfModel | None = None,
                     toks: SpecialTokens = SpecialTokens(), tokenizer: Tokenizer | None = None) -> list[str]:
    if spec.cited_view in ("tfidf", "entities"):
        if model is None:
            raise ContextError(f"the {spec.cited_view!r} view needs a fitted tf-idf model")
        builder = build_cited_tfidf if spec.cited_view == "tfidf" else build_cited_entities
        return builder(doc, model, spec, toks, tokenizer)
    return build_cited_sentences(doc, spec, tokenizer)


def assemble(principal_tokens: Sequence[str], cited_tokens: Sequence[str],
             target_tokens: Sequence[str] | None, toks: SpecialTokens, spec: ContextSpec) -> AssembledContext:
    """Lay out ``S' <sep> C' [<tgt> Y]`` and pad to the fixed total length."""
    j, k, m = len(principal_tokens), len(cited_tokens), len(target_tokens or ())
    for name, n, budget in (("principal", j, spec.principal_budget), ("cited", k, spec.cited_budget),
                            ("target", m, spec.target_budget)):
        if n > budget:
            raise ContextError(f"{name} component has {n} tokens, over its budget of {budget}")
    seq = [*principal_tokens, toks.sep_principal, *cited_tokens]
    if m:
        seq += [toks.sep_target, *target_tokens]
    seq += [toks.pad] * (spec.total_length - len(seq))
    return AssembledContext(tuple(seq), j, k, m)


def layout_errors(ctx: AssembledContext, toks: SpecialTokens, spec: ContextSpec) -> list[str]:
    """Describe every way ``ctx`` breaks the layout contract (empty when valid)."""
    errs = []
    j, k, m = ctx.principal_len, ctx.cited_len, ctx.target_len
    if j > spec.principal_budget or k > spec.cited_budget or m > spec.target_budget:
        errs.append(f"budget exceeded: j={j} k={k} m={m}")
    if len(ctx.tokens) != spec.total_length:
        errs.append(f"length {len(ctx.tokens)} != {spec.total_length}")
    if ctx.tokens.count(toks.sep_principal) != 1 or ctx.tokens[j:j + 1] != (toks.sep_principal,):
        errs.append("principal separator missing, duplicated or misplaced")
    n_tgt = ctx.tokens.count(toks.sep_target)
    if m and (n_tgt != 1 or ctx.tokens[j + 1 + k] != toks.sep_target):
        errs.append("target separator missing or misplaced")
    if not m and n_tgt:
        errs.append("target separator present without a target")
    end = j + 1 + k + (m + 1 if m else 0)
    if any(t != toks.pad for t in ctx.tokens[end:]):
        errs.append("non-pad token after the last segment")
    return errs


def build_context(instance: ExplanationInstance, corpus: Corpus, spec: ContextSpec,
                  toks: SpecialTokens = SpecialTokens(), model: TfidfModel | None = None,
                  tokenizer: Tokenizer | None = None, with_target: bool = True) -> AssembledContext:
    principal = build_principal_view(corpus[instance.principal_id], instance, spec, tokenizer)
    cited = build_cited_view(corpus[instance.cited_id], spec, model, toks, tokenizer)
    target = list(instance.target[: spec.target_budget]) if with_target else None
    return assemble(principal, cited, target, toks, spec)
