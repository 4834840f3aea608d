"""Command-line pipeline: dataset, contexts, retrieval, reranking and evaluation.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import analysis, synthetic
from .context import CITED_VIEWS, PRINCIPAL_VIEWS, ContextSpec, SpecialTokens, build_context
from .corpus import (
    CorpusError,
    build_splits,
    dataset_statistics,
    load_corpus,
    make_split_plan,
    read_instances,
    write_instances,
)
from .embed import EmbeddingError, embed_documents, load_embeddings, save_embeddings
from .metrics import EvalPair, MetricError, mean_token_overlap, read_judgments
from .rerank import MatchConfig, RerankError, ranked_entities, read_candidates, select_best, write_candidates
from .retrieval import Retriever, RetrievalError, RetrievalWeights, TrainIndex, mert_tune
from .textkit import TfidfModel, Tokenizer, fit_tfidf, is_term

log = logging.getLogger("citerel")

CONFIG_ENV = "CITEREL_CONFIG"
VIEW_ALIASES = {"abs": "abstract", "abstract": "abstract", "intro": "introduction",
                "introduction": "introduction", "sample": "sampled", "sampled": "sampled",
                "tfidf": "tfidf", "entities": "entities", "ent": "entities"}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


DATA_ERRORS = (CorpusError, EmbeddingError, RetrievalError, MetricError, analysis.AnalysisError,
               DataError, OSError, json.JSONDecodeError, KeyError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def load_config(path) -> dict:
    if not path:
        return {}
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    return json.loads(path.read_text())


def parse_view(text: str) -> tuple[str, str]:
    for sep in ("×", "x", ":", "/"):
        if sep in text:
            p, c = text.split(sep, 1)
            break
    else:
        raise UsageError(f"view {text!r} must look like PRINCIPAL×CITED, e.g. intro×tfidf")
    p, c = VIEW_ALIASES.get(p.strip().lower()), VIEW_ALIASES.get(c.strip().lower())
    if p not in PRINCIPAL_VIEWS or c not in CITED_VIEWS:
        raise UsageError(f"unknown view {text!r}")
    return p, c


def _require(*paths):
    for p in paths:
        if p is not None and not Path(p).exists():
            raise DataError(f"input not found: {p}")


def _pick(flag, cfg: dict, key: str, default):
    return flag if flag is not None else cfg.get(key, default)


def _context_spec(cfg: dict, principal: str, cited: str, seed: int) -> ContextSpec:
    block = dict(cfg.get("context", {}))
    block.update(principal_view=principal, cited_view=cited)
    block.setdefault("sample_seed", seed)
    try:
        return ContextSpec(**block)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad [context] config: {exc}") from None


def _special_tokens(cfg: dict, tokenizer: Tokenizer) -> SpecialTokens:
    try:
        toks = SpecialTokens.from_config(cfg.get("special_tokens"))
        toks.validate(tokenizer)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad [special_tokens] config: {exc}") from None
    return toks


def _write_jsonl(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def _read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _split_indices(instances, split):
    return [(i, inst) for i, inst in enumerate(instances) if inst.split == split]


# --- subcommands -------------------------------------------------------------

def cmd_synth_corpus(args, cfg):
    records = synthetic.make_corpus_records(args.docs, args.seed)
    synthetic.write_corpus(records, args.out)
    log.info("wrote %d synthetic documents to %s", len(records), args.out)


def cmd_build_dataset(args, cfg):
    _require(args.corpus)
    split_cfg = cfg.get("split", {})
    seed = _pick(args.seed, cfg, "seed", 0)
    corpus = load_corpus(args.corpus)
    plan = make_split_plan(corpus, _pick(args.n_test, split_cfg, "n_test", 500),
                           _pick(args.n_validation, split_cfg, "n_validation", 500), seed)
    tokenizer = Tokenizer()
    instances, stats = build_splits(corpus, plan, tokenizer)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_instances(instances, out / "instances.jsonl")
    summary = dataset_statistics(corpus, instances, tokenizer)
    summary["dropped"] = {"missing_cited": corpus.stats.dropped_missing, "self_citation": corpus.stats.dropped_self,
                          "unmarked": corpus.stats.dropped_unmarked, "multi_citation": stats.dropped_multi,
                          "leakage": stats.dropped_leakage, "no_context": stats.dropped_no_context}
    summary["resolved_edges"] = stats.resolved
    summary["conserved"] = stats.conserved()
    (out / "stats.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    (out / "split_plan.json").write_text(json.dumps(
        {"seed": plan.seed, "test": sorted(plan.test_principals),
         "validation": sorted(plan.validation_principals)}, indent=2) + "\n")
    log.info("%d instances (%s)", len(instances), summary["splits"])


def cmd_build_context(args, cfg):
    views = ([(p, c) for p in PRINCIPAL_VIEWS for c in CITED_VIEWS] if args.view == ["all"]
             else [parse_view(v) for v in args.view])
    _require(args.corpus, args.instances, args.tfidf)
    seed = _pick(args.seed, cfg, "seed", 0)
    tokenizer = Tokenizer()
    toks = _special_tokens(cfg, tokenizer)
    specs = [_context_spec(cfg, p, c, seed) for p, c in views]
    corpus = load_corpus(args.corpus)
    instances = read_instances(args.instances, tokenizer)
    model = TfidfModel.load(args.tfidf) if args.tfidf else fit_tfidf(corpus, tokenizer=tokenizer)
    selected = _split_indices(instances, args.split) if args.split != "all" else list(enumerate(instances))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for spec in specs:
        if spec.cited_view == "entities":
            lacking = {inst.cited_id for _, inst in selected if corpus[inst.cited_id].entity_annotations is None}
            if lacking:
                log.warning("%d cited documents have no entity annotations; their entity view "
                            "degrades to the tf-idf list", len(lacking))
        records = []
        for idx, inst in selected:
            try:
                ctx = build_context(inst, corpus, spec, toks, model, tokenizer, with_target=not args.no_target)
            except ValueError as exc:
                raise DataError(f"instance {idx}: {exc}") from None
            records.append(ctx.to_json(idx))
        name = f"contexts_{spec.principal_view}_x_{spec.cited_view}.jsonl"
        _write_jsonl(records, out / name)
        log.info("wrote %d contexts to %s", len(records), out / name)


def cmd_embed(args, cfg):
    _require(args.corpus)
    corpus = load_corpus(args.corpus)
    store = embed_documents(corpus, args.dim, _pick(args.seed, cfg, "seed", 0))
    save_embeddings(store, args.out, binary=args.binary)
    log.info("wrote %d vectors of dim %d", len(store), store.dim)


def _weights(alpha, beta) -> RetrievalWeights:
    try:
        return RetrievalWeights(alpha, beta)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_retrieve(args, cfg):
    rcfg = cfg.get("retrieval", {})
    w = _weights(_pick(args.alpha, rcfg, "alpha", 1.0), _pick(args.beta, rcfg, "beta", 1.0))
    K = _pick(args.k, rcfg, "k", 64)
    grid = None
    if "grid" in rcfg:
        grid = [_weights(a, b) for a, b in rcfg["grid"]]
    if args.grid:
        grid = [_weights(*map(float, cell.split(","))) for cell in args.grid]
    _require(args.instances, args.embeddings)
    tokenizer = Tokenizer()
    instances = read_instances(args.instances, tokenizer)
    store = load_embeddings(args.embeddings)
    index = TrainIndex(instances)
    if args.tune:
        validation = [inst for inst in instances if inst.split == "validation"]
        w, bleu = mert_tune(validation, store, index, K, grid, tokenizer)
        weights_out = Path(args.weights_out or Path(args.out).with_suffix(".weights.json"))
        weights_out.write_text(json.dumps({"alpha": w.alpha, "beta": w.beta, "k": K,
                                           "validation_bleu": bleu}, indent=2, sort_keys=True) + "\n")
        log.info("tuned weights alpha=%g beta=%g (validation BLEU %.2f)", w.alpha, w.beta, bleu)
    retriever = Retriever(store, index, K)
    records = [retriever.retrieve(inst.principal_id, inst.cited_id, w).to_json(idx)
               for idx, inst in _split_indices(instances, args.split)]
    _write_jsonl(records, args.out)
    log.info("retrieved %d explanations", len(records))


def cmd_synth_candidates(args, cfg):
    _require(args.instances)
    instances = read_instances(args.instances)
    sets = synthetic.make_candidates(_split_indices(instances, args.split), args.k,
                                     _pick(args.seed, cfg, "seed", 0))
    write_candidates(sets, args.out)


def _match_config(args, cfg) -> MatchConfig:
    mcfg = cfg.get("match", {})
    try:
        return MatchConfig(_pick(args.threshold, mcfg, "threshold", 0.7),
                           _pick(args.extractor, mcfg, "extractor", "ngram_scan"),
                           _pick(args.ngram_max, mcfg, "ngram_max", 6))
    except RerankError as exc:
        raise UsageError(str(exc)) from None


def cmd_rerank(args, cfg):
    match = _match_config(args, cfg)
    _require(args.corpus, args.instances, args.candidates)
    tokenizer = Tokenizer()
    corpus = load_corpus(args.corpus)
    instances = read_instances(args.instances, tokenizer)
    try:
        sets = read_candidates(args.candidates)
    except RerankError as exc:
        raise DataError(str(exc)) from None
    if args.num_candidates is not None:
        bad = [s.instance_ref for s in sets if len(s) != args.num_candidates]
        if bad:
            raise DataError(f"candidate count mismatch: {len(bad)} sets do not have "
                            f"{args.num_candidates} candidates (first: instance {bad[0]})")
    model = fit_tfidf(corpus, tokenizer=tokenizer)
    records = []
    for s in sets:
        if not 0 <= s.instance_ref < len(instances):
            raise DataError(f"candidate set refers to unknown instance {s.instance_ref}")
        cited = ranked_entities(corpus[instances[s.instance_ref].cited_id], model, tokenizer)
        try:
            best, score = select_best(s, cited, match, tokenizer)
        except RerankError as exc:
            raise DataError(str(exc)) from None
        records.append({"instance": s.instance_ref, "index": best, "text": s.candidates[best], "mrr": score})
    _write_jsonl(records, args.out)
    log.info("reranked %d candidate sets", len(records))


def _named_paths(values) -> dict:
    out = {}
    for v in values or ():
        name, sep, path = v.partition("=")
        if not sep:
            raise UsageError(f"expected NAME=PATH, got {v!r}")
        out[name] = path
    return out


def cmd_evaluate(args, cfg):
    systems_paths = _named_paths(args.system)
    contexts_paths = _named_paths(args.contexts)
    if not systems_paths:
        raise UsageError("at least one --system NAME=PATH is required")
    mcfg = cfg.get("metrics", {})
    seed = _pick(args.seed, cfg, "seed", 0)
    _require(args.instances, *systems_paths.values(), *contexts_paths.values(),
             args.judgments, args.bounds, args.completions, args.corpus)
    if args.bounds and not args.corpus:
        raise UsageError("--bounds needs --corpus for rerank comparison")
    tokenizer = Tokenizer()
    instances = read_instances(args.instances, tokenizer)

    def gold(i):
        if not 0 <= i < len(instances):
            raise DataError(f"output refers to unknown instance {i}")
        return instances[i]

    systems = {}
    for name, path in sorted(systems_paths.items()):
        systems[name] = [EvalPair(tokenizer(r["text"]), gold(r["instance"]).target, r["instance"],
                                  gold(r["instance"]).acl_flag) for r in _read_jsonl(path)]

    overlap = {}
    for name, path in sorted(contexts_paths.items()):
        items = []
        for r in _read_jsonl(path):
            ctx_tokens = r["tokens"][: r["j"] + 1 + r["k"]]
            items.append((ctx_tokens, [t for t in gold(r["instance"]).target if is_term(t)]))
        overlap[name] = mean_token_overlap(items)

    bounds = rerank_bleu = None
    if args.bounds:
        sets = read_candidates(args.bounds)
        refs = [gold(s.instance_ref).target for s in sets]
        ks = sorted(set(args.ks or analysis.DEFAULT_KS))
        corpus = load_corpus(args.corpus)
        model = fit_tfidf(corpus, tokenizer=tokenizer)
        match = _match_config(args, cfg)
        cited = [ranked_entities(corpus[gold(s.instance_ref).cited_id], model, tokenizer) for s in sets]
        picks, rerank_bleu = analysis.rerank_curve(sets, refs, cited, ks, match, tokenizer)
        bounds = analysis.oracle_bounds(sets, refs, ks, tokenizer, warm_starts=picks)

    judgments = read_judgments(args.judgments) if args.judgments else None
    auto = None
    if args.completions:
        items = [(gold(r["instance"]).target, r["text"]) for r in _read_jsonl(args.completions)]
        auto = analysis.autocomplete_eval(items, args.prefix_len, tokenizer)

    report = analysis.build_report(
        systems, seed=seed, iterations=_pick(args.iterations, mcfg, "iterations", 100),
        sample_size=_pick(args.sample_size, mcfg, "sample_size", 1000), overlap=overlap,
        bounds=bounds, rerank_bleu=rerank_bleu, judgments=judgments, autocomplete=auto)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(analysis.report_json(report), encoding="utf-8")
    (out / "report.txt").write_text(analysis.render_text(report), encoding="utf-8")
    log.info("wrote %s", out / "report.json")


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="citerel", description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=os.environ.get(CONFIG_ENV),
                        help=f"TOML or JSON config (default: ${CONFIG_ENV})")
    parser.add_argument("-v", "--verbose", action="store_true")
    common = _Parser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    add = sub.add_parser

    def sub_parser(name, **kw):
        return add(name, parents=[common], **kw)

    sub.add_parser = sub_parser

    p = sub.add_parser("synth-corpus", help="write a synthetic corpus-jsonl file")
    p.add_argument("--out", required=True)
    p.add_argument("--docs", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth_corpus)

    p = sub.add_parser("build-dataset", help="extract instances and build splits")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-test", type=int)
    p.add_argument("--n-validation", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("build-context", help="emit conditioning contexts")
    p.add_argument("--corpus", required=True)
    p.add_argument("--instances", required=True)
    p.add_argument("--view", nargs="+", required=True, help="PRINCIPAL×CITED pairs, or 'all'")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--split", default="test", choices=("train", "validation", "test", "all"))
    p.add_argument("--tfidf", help="tf-idf sidecar JSON (fitted on the corpus when omitted)")
    p.add_argument("--no-target", action="store_true", help="inference layout without the target")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_build_context)

    p = sub.add_parser("embed", help="write deterministic test embeddings for a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--seed", type=int)
    p.add_argument("--binary", action="store_true")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("retrieve", help="nearest-neighbour retrieval baseline")
    p.add_argument("--instances", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--tune", action="store_true", help="grid-search weights on validation BLEU")
    p.add_argument("--grid", nargs="+", metavar="ALPHA,BETA")
    p.add_argument("--weights-out")
    p.add_argument("--split", default="test", choices=("validation", "test"))
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("synth-candidates", help="write noisy candidate sets for evaluation instances")
    p.add_argument("--instances", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--split", default="test", choices=("validation", "test"))
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth_candidates)

    def match_flags(p):
        p.add_argument("--threshold", type=float)
        p.add_argument("--extractor", choices=("ingested", "ngram_scan"))
        p.add_argument("--ngram-max", type=int)

    p = sub.add_parser("rerank", help="select candidates by entity MRR")
    p.add_argument("--corpus", required=True)
    p.add_argument("--instances", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--num-candidates", type=int)
    match_flags(p)
    p.set_defaults(func=cmd_rerank)

    for name in ("evaluate", "analyze"):
        p = sub.add_parser(name, help="metrics, significance, overlap, bounds and judgments report")
        p.add_argument("--instances", required=True)
        p.add_argument("--system", "--systems", nargs="+", action="extend", metavar="NAME=PATH")
        p.add_argument("--contexts", nargs="+", action="extend", metavar="NAME=PATH")
        p.add_argument("--judgments")
        p.add_argument("--bounds", metavar="CANDIDATES")
        p.add_argument("--ks", type=int, nargs="+")
        p.add_argument("--corpus")
        p.add_argument("--completions")
        p.add_argument("--prefix-len", type=int, default=3)
        p.add_argument("--iterations", type=int)
        p.add_argument("--sample-size", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", required=True, help="output directory")
        match_flags(p)
        p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s: %(message)s")
        cfg = load_config(args.config)
        args.func(args, cfg)
    except UsageError as exc:
        print(f"citerel: usage error: {exc}", file=sys.stderr)
        return 1
    except (*DATA_ERRORS, ValueError) as exc:
        print(f"citerel: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
