"""Citation-graph corpus ingestion and leakage-free split construction."""

from __future__ import annotations

import json
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .textkit import CITE_TOKEN, DEFAULT_FIELDS, Tokenizer

TARGET_BUDGET = 100
SPLITS = ("train", "validation", "test")

# raw citation markup, e.g. "[CITE:doc42]"
CITATION_MARKER = re.compile(r"\[CITE:[^\]]*\]")


class CorpusError(ValueError):
    """Raised for malformed or inconsistent corpus input."""


def mask_citations(sentence: str) -> str:
    """Replace every citation marker with the placeholder token."""
    return CITATION_MARKER.sub(CITE_TOKEN, sentence)


def count_citations(sentence: str) -> int:
    return len(CITATION_MARKER.findall(sentence)) + sentence.count(CITE_TOKEN)


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str = ""
    abstract: str = ""
    introduction: str = ""
    body_paragraphs: tuple = ()
    entity_annotations: tuple | None = None
    acl: bool = False

    def field_text(self, name: str, masked: bool = True) -> str:
        if name == "body":
            text = "\n".join(self.body_paragraphs)
        elif name in ("title", "abstract", "introduction"):
            text = getattr(self, name)
        else:
            raise KeyError(f"unknown document field {name!r}")
        return mask_citations(text) if masked else text

    def text(self, fields: Sequence[str] = DEFAULT_FIELDS) -> str:
        return "\n".join(self.field_text(f) for f in fields)


@dataclass(frozen=True)
class CitationEdge:
    citing_id: str
    cited_id: str
    sentence: str
    location: tuple[int, int]


@dataclass
class LoadStats:
    edges_total: int = 0
    dropped_missing: int = 0
    dropped_self: int = 0
    dropped_multi: int = 0
    dropped_unmarked: int = 0

    @property
    def resolved(self) -> int:
        """Edges whose cited document exists (self-citations excluded)."""
        return self.edges_total - self.dropped_missing - self.dropped_self


@dataclass
class Corpus:
    documents: dict[str, Document]
    edges: list[CitationEdge]
    stats: LoadStats = field(default_factory=LoadStats)

    def __len__(self):
        return len(self.documents)

    def __contains__(self, doc_id):
        return doc_id in self.documents

    def __getitem__(self, doc_id) -> Document:
        return self.documents[doc_id]

    def __iter__(self):
        return iter(self.documents.values())

    @property
    def doc_ids(self) -> list[str]:
        return list(self.documents)


def _document_from_record(rec: dict, lineno: int) -> Document:
    try:
        doc_id = rec["doc_id"]
        abstract = rec["abstract"]
        introduction = rec["introduction"]
    except KeyError as exc:
        raise CorpusError(f"line {lineno}: missing required key {exc.args[0]!r}") from None
    if not isinstance(doc_id, str) or not doc_id:
        raise CorpusError(f"line {lineno}: doc_id must be a non-empty string")
    if not isinstance(abstract, str) or not isinstance(introduction, str):
        raise CorpusError(f"line {lineno}: abstract and introduction must be strings")
    entities = rec.get("entities")
    return Document(
        doc_id=doc_id,
        title=rec.get("title", ""),
        abstract=abstract,
        introduction=introduction,
        body_paragraphs=tuple(rec.get("body", ())),
        entity_annotations=None if entities is None else tuple(entities),
        acl=bool(rec.get("acl", False)),
    )


def parse_corpus(lines: Iterable[str]) -> Corpus:
    documents: dict[str, Document] = {}
    raw_edges = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {lineno}: malformed JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise CorpusError(f"line {lineno}: expected a JSON object")
        doc = _document_from_record(rec, lineno)
        if doc.doc_id in documents:
            raise CorpusError(f"line {lineno}: duplicate doc_id {doc.doc_id!r}")
        documents[doc.doc_id] = doc
        for cit in rec.get("citations", ()):
            try:
                raw_edges.append((doc.doc_id, cit["cited_id"], cit["sentence"],
                                  (int(cit.get("para", 0)), int(cit.get("sent", 0)))))
            except (KeyError, TypeError) as exc:
                raise CorpusError(f"line {lineno}: malformed citation record ({exc})") from None

    stats = LoadStats(edges_total=len(raw_edges))
    edges = []
    for citing, cited, sentence, loc in raw_edges:
        if cited not in documents:
            stats.dropped_missing += 1
        elif cited == citing:
            stats.dropped_self += 1
        else:
            n_markers = count_citations(sentence)
            if n_markers > 1:
                stats.dropped_multi += 1
            elif n_markers == 0:
                stats.dropped_unmarked += 1
            else:
                edges.append(CitationEdge(citing, cited, mask_citations(sentence), loc))
    return Corpus(documents, edges, stats)


def load_corpus(path) -> Corpus:
    """Load a corpus-jsonl file (one document record per line)."""
    with open(path, encoding="utf-8") as fh:
        return parse_corpus(fh)


@dataclass(frozen=True)
class ExplanationInstance:
    principal_id: str
    cited_id: str
    target: tuple
    split: str
    acl_flag: bool = False
    sentence: str = ""
    location: tuple = (0, 0)

    @property
    def target_text(self) -> str:
        return " ".join(self.target)

    def to_json(self, index: int | None = None) -> dict:
        rec = {"principal": self.principal_id, "cited": self.cited_id,
               "target": self.target_text, "split": self.split}
        if index is not None:
            rec["instance"] = index
        rec.update(acl=self.acl_flag, sentence=self.sentence,
                   para=self.location[0], sent=self.location[1])
        return rec

    @classmethod
    def from_json(cls, rec: dict, tokenizer: Tokenizer | None = None) -> "ExplanationInstance":
        tokenizer = tokenizer or Tokenizer()
        return cls(rec["principal"], rec["cited"], tuple(tokenizer(rec["target"])),
                   rec["split"], bool(rec.get("acl", False)), rec.get("sentence", ""),
                   (int(rec.get("para", 0)), int(rec.get("sent", 0))))


@dataclass(frozen=True)
class SplitPlan:
    test_principals: frozenset
    validation_principals: frozenset
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "test_principals", frozenset(self.test_principals))
        object.__setattr__(self, "validation_principals", frozenset(self.validation_principals))

    @property
    def held_out(self) -> frozenset:
        return self.test_principals | self.validation_principals


def make_split_plan(corpus: Corpus, n_test: int = 500, n_validation: int = 500,
                    seed: int = 0) -> SplitPlan:
    """Randomly choose held-out principal documents among those that cite something."""
    citing = sorted({e.citing_id for e in corpus.edges})
    if n_test + n_validation > len(citing):
        raise CorpusError(f"requested {n_test}+{n_validation} held-out principals "
                          f"but only {len(citing)} documents cite anything")
    chosen = random.Random(seed).sample(citing, n_test + n_validation)
    return SplitPlan(frozenset(chosen[:n_test]), frozenset(chosen[n_test:]), seed)


@dataclass
class SplitStats:
    resolved: int = 0
    dropped_multi: int = 0
    dropped_leakage: int = 0
    dropped_no_context: int = 0
    counts: Counter = field(default_factory=Counter)

    def conserved(self) -> bool:
        kept = sum(self.counts[s] for s in SPLITS)
        return kept + self.dropped_multi + self.dropped_leakage + self.dropped_no_context == self.resolved


def build_splits(corpus: Corpus, plan: SplitPlan, tokenizer: Tokenizer | None = None,
                 target_budget: int = TARGET_BUDGET) -> tuple[list[ExplanationInstance], SplitStats]:
    """Turn single-citation edges into train/validation/test instances.

    Edges from held-out principals become evaluation instances. Every other
    edge is a training instance unless it cites a held-out principal.
    """
    tokenizer = tokenizer or Tokenizer()
    if plan.test_principals & plan.validation_principals:
        raise CorpusError("test and validation principal sets overlap")
    unknown = plan.held_out - corpus.documents.keys()
    if unknown:
        raise CorpusError(f"split plan names documents absent from the corpus: {sorted(unknown)[:5]}")

    stats = SplitStats(resolved=len(corpus.edges) + corpus.stats.dropped_multi,
                       dropped_multi=corpus.stats.dropped_multi)
    held_out = plan.held_out
    instances = []
    for edge in corpus.edges:
        principal = corpus[edge.citing_id]
        if not principal.abstract and not principal.introduction:
            stats.dropped_no_context += 1
            continue
        if edge.citing_id in plan.test_principals:
            split = "test"
        elif edge.citing_id in plan.validation_principals:
            split = "validation"
        elif edge.cited_id in held_out:
            stats.dropped_leakage += 1
            continue
        else:
            split = "train"
        target = tuple(tokenizer(edge.sentence)[:target_budget])
        instances.append(ExplanationInstance(edge.citing_id, edge.cited_id, target, split,
                                             principal.acl, edge.sentence, edge.location))
        stats.counts[split] += 1
    return instances, stats


def dataset_statistics(corpus: Corpus, instances: Sequence[ExplanationInstance],
                       tokenizer: Tokenizer | None = None) -> dict:
    """Corpus totals and per-document averages (documents, tokens, unique tokens, explanations)."""
    tokenizer = tokenizer or Tokenizer()
    n_docs = len(corpus)
    total_tokens = 0
    vocab: set = set()
    unique_per_doc = 0
    for doc in corpus:
        toks = tokenizer(doc.text(("title",) + DEFAULT_FIELDS))
        total_tokens += len(toks)
        distinct = set(toks)
        unique_per_doc += len(distinct)
        vocab |= distinct
    splits = Counter(inst.split for inst in instances)
    return {
        "documents": n_docs,
        "tokens": {"total": total_tokens, "per_doc": total_tokens / n_docs if n_docs else 0.0},
        "unique_tokens": {"total": len(vocab), "per_doc": unique_per_doc / n_docs if n_docs else 0.0},
        "explanations": {"total": len(instances), "per_doc": len(instances) / n_docs if n_docs else 0.0},
        "splits": {s: splits.get(s, 0) for s in SPLITS},
    }


def write_instances(instances: Sequence[ExplanationInstance], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, inst in enumerate(instances):
            fh.write(json.dumps(inst.to_json(i), ensure_ascii=False) + "\n")


def read_instances(path, tokenizer: Tokenizer | None = None) -> list[ExplanationInstance]:
    tokenizer = tokenizer or Tokenizer()
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(ExplanationInstance.from_json(json.loads(line), tokenizer))
    return out
