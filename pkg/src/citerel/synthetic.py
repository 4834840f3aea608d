"""Deterministic synthetic citation corpora, candidate sets and judgments for tests and demos."""

from __future__ import annotations

import csv
import json
import random
from importlib import resources
from typing import Sequence

from .corpus import Corpus, ExplanationInstance, parse_corpus
from .metrics import sentence_bleu
from .rerank import CandidateSet
from .textkit import Tokenizer

TOPICS = {
    "parsing": ["parser", "treebank", "dependency", "constituency", "grammar", "syntax", "transition",
                "arc", "head", "span", "chart", "lexicalized", "projective", "oracle", "beam"],
    "translation": ["translation", "bilingual", "alignment", "decoder", "phrase", "reordering",
                    "bitext", "source", "target", "lexicon", "fluency", "adequacy", "domain"],
    "retrieval": ["retrieval", "query", "ranking", "index", "document", "relevance", "passage",
                  "expansion", "click", "reranker", "lexical", "bm25", "recall", "corpus"],
    "vision": ["image", "pixel", "convolution", "segmentation", "detection", "camera", "feature",
               "pooling", "resolution", "scene", "object", "depth", "patch", "visual"],
    "speech": ["speech", "acoustic", "phoneme", "spectrogram", "speaker", "prosody", "audio",
               "waveform", "recognition", "pronunciation", "noise", "frame", "utterance"],
    "graphs": ["graph", "node", "edge", "embedding", "propagation", "community", "walk", "link",
               "spectral", "neighborhood", "adjacency", "vertex", "clustering", "citation"],
}
ENTITY_HEADS = ["model", "network", "corpus", "benchmark", "algorithm", "encoder", "classifier",
                "framework", "objective", "dataset"]
GENERIC = ["we", "propose", "a", "new", "method", "for", "the", "task", "of", "and", "show", "that",
           "it", "improves", "over", "strong", "baselines", "on", "several", "results", "our",
           "approach", "uses", "with", "in", "this", "paper", "study", "experiments", "demonstrate"]

ABSTRACT_TEMPLATES = [
    "We present {name}, a {e0} for {w0} {w1}.",
    "Our {e1} combines {w2} and {w3} with a {w4} {head}.",
    "Experiments on {w5} {w6} show that {name} improves {w7} over strong baselines.",
    "We also study how {w8} affects the {e2}.",
    "The {e0} is trained on {w9} data and evaluated on {w1} {w3}.",
]
INTRO_TEMPLATES = [
    "Research on {w0} {w1} has grown rapidly.",
    "Many systems rely on {w2} and {w3}.",
    "However the role of {w4} in {w5} remains unclear.",
    "Here we introduce {name} for {w6}.",
    "Our main contribution is a {e1} built around {w7}.",
]
BODY_TEMPLATES = [
    "We describe the {w0} component in detail.",
    "The {w1} {head} is optimized jointly with the {w2} module.",
    "Table results report {w3} accuracy across {w4} settings.",
    "Ablations remove the {w5} term and measure {w6}.",
    "The {e0} converges after a few epochs of {w7} training.",
    "Error analysis shows that {w8} errors dominate.",
]
CITE_TEMPLATES = [
    "We build on the {cname} {ce} of [CITE:{cid}] for {cw0} {cw1}.",
    "[CITE:{cid}] introduced {cname}, a {ce} that models {cw0}.",
    "Following [CITE:{cid}] we use the {ce} to handle {cw1} {cw2}.",
    "Unlike [CITE:{cid}], our {w0} does not require {cw0} supervision.",
    "The {cname} {ce} [CITE:{cid}] is a strong baseline for {cw2}.",
    "Our results on {cw1} are consistent with [CITE:{cid}].",
]


def _doc_profile(rng: random.Random, i: int) -> dict:
    topic = rng.choice(sorted(TOPICS))
    words = TOPICS[topic]
    entities = []
    for _ in range(4):
        a, b = rng.sample(words, 2)
        entities.append(f"{a} {b} {rng.choice(ENTITY_HEADS)}")
    return {"doc_id": f"d{i:04d}", "topic": topic, "name": f"{rng.choice(words)}net{i}",
            "entities": entities}


def _fill(template: str, rng: random.Random, prof: dict, cited: dict | None = None) -> str:
    words = TOPICS[prof["topic"]]
    fields = {f"w{k}": rng.choice(words) for k in range(10)}
    fields.update(name=prof["name"], head=rng.choice(ENTITY_HEADS),
                  **{f"e{k}": prof["entities"][k % len(prof["entities"])] for k in range(3)})
    if cited is not None:
        cwords = TOPICS[cited["topic"]]
        fields.update(cid=cited["doc_id"], cname=cited["name"], ce=rng.choice(cited["entities"]),
                      **{f"cw{k}": rng.choice(cwords) for k in range(3)})
    return template.format(**fields)


def make_corpus_records(n_docs: int = 200, seed: int = 0, multi_rate: float = 0.05,
                        missing_rate: float = 0.03, acl_rate: float = 0.3) -> list[dict]:
    """Corpus-jsonl records for a topical random citation graph."""
    rng = random.Random(seed)
    profiles = [_doc_profile(rng, i) for i in range(n_docs)]
    by_topic: dict = {}
    for p in profiles:
        by_topic.setdefault(p["topic"], []).append(p)

    records = []
    for prof in profiles:
        abstract = " ".join(_fill(t, rng, prof) for t in ABSTRACT_TEMPLATES[: rng.randint(3, 5)])
        paragraphs = [[_fill(t, rng, prof) for t in rng.sample(INTRO_TEMPLATES, 4)]]
        paragraphs += [[_fill(t, rng, prof) for t in rng.sample(BODY_TEMPLATES, 4)] for _ in range(3)]
        citations = []
        for _ in range(rng.randint(2, 6)):
            pool = by_topic[prof["topic"]] if rng.random() < 0.8 else profiles
            cited = rng.choice(pool)
            if cited is prof:
                continue
            para = rng.randrange(len(paragraphs))
            sent = rng.randint(0, len(paragraphs[para]))
            roll = rng.random()
            if roll < missing_rate:
                cited = dict(cited, doc_id=f"ghost{rng.randrange(10**6)}")
            sentence = _fill(rng.choice(CITE_TEMPLATES), rng, prof, cited)
            extra = None
            if missing_rate <= roll < missing_rate + multi_rate:
                extra = rng.choice(profiles)["doc_id"]
                sentence = sentence[:-1] + f" and [CITE:{extra}]."
            paragraphs[para].insert(sent, sentence)
            for c in (cited["doc_id"], extra):
                if c is not None:
                    citations.append({"cited_id": c, "sentence": sentence, "para": para, "sent": sent})
        # positions shift as sentences are inserted; recompute them from the final text
        for cit in citations:
            for p_idx, para in enumerate(paragraphs):
                if cit["sentence"] in para:
                    cit["para"], cit["sent"] = p_idx, para.index(cit["sentence"])
                    break
        records.append({
            "doc_id": prof["doc_id"],
            "title": f"{prof['name']}: {prof['entities'][0]}",
            "abstract": abstract,
            "introduction": " ".join(paragraphs[0]),
            "body": [" ".join(p) for p in paragraphs[1:]],
            "entities": prof["entities"][:3] + [prof["entities"][0].upper()],
            "acl": rng.random() < acl_rate,
            "citations": citations,
        })
    return records


def make_corpus(n_docs: int = 200, seed: int = 0, **kw) -> Corpus:
    return parse_corpus(json.dumps(r) for r in make_corpus_records(n_docs, seed, **kw))


def write_corpus(records: Sequence[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def bundled_corpus_path():
    """Path of the synthetic corpus shipped with the package."""
    return resources.files("citerel") / "data" / "synthetic_corpus.jsonl"


def make_candidates(instances: Sequence[tuple[int, ExplanationInstance]], k: int = 20, seed: int = 0,
                    vocabulary: Sequence[str] = GENERIC) -> list[CandidateSet]:
    """Noisy variants of each gold sentence standing in for sampled generations.

    Each candidate keeps a random share of gold tokens and replaces the rest
    with vocabulary words, so candidates range from near-copies to unrelated.
    """
    out = []
    for idx, inst in instances:
        rng = random.Random(f"{seed}:{idx}")
        gold = list(inst.target)
        cands = []
        for _ in range(k):
            keep = rng.random()
            toks = [t if rng.random() < keep else rng.choice(vocabulary) for t in gold]
            if len(toks) > 3 and rng.random() < 0.5:
                del toks[rng.randrange(len(toks))]
            cands.append(" ".join(toks))
        out.append(CandidateSet(idx, cands))
    return out


def make_judgments(outputs: dict, refs: dict, seed: int = 0, judges_per_item: int = 2,
                   dimensions: Sequence[str] = ("correct", "specific", "plausible"),
                   skip_rate: float = 0.05, tokenizer: Tokenizer | None = None) -> list[dict]:
    """Yes/no/skip judgments whose odds of "yes" grow with sentence BLEU.

    ``outputs`` maps system -> {instance -> text}; ``refs`` maps instance -> gold tokens.
    """
    tokenizer = tokenizer or Tokenizer()
    rng = random.Random(seed)
    rows = []
    for system in sorted(outputs):
        for inst in sorted(outputs[system]):
            quality = sentence_bleu(tokenizer(outputs[system][inst]), refs[inst]) / 100.0
            for dim in dimensions:
                for _ in range(judges_per_item):
                    if rng.random() < skip_rate:
                        verdict = "skip"
                    else:
                        verdict = "yes" if rng.random() < 0.2 + 0.7 * quality else "no"
                    rows.append({"instance": inst, "system": system, "dimension": dim, "verdict": verdict})
    return rows


def write_judgments(rows: Sequence[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["instance", "system", "dimension", "verdict"])
        writer.writeheader()
        writer.writerows(rows)
