"""Oracle ranking bounds, auto-completion scoring and report assembly."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .metrics import (
    EvalPair,
    MetricError,
    bleu_from_stats,
    bleu_statistic,
    bleu_stats,
    bonferroni,
    bootstrap_compare,
    corpus_bleu,
    judgment_correlations,
    judgment_rates,
    rouge_l,
    rouge_n,
    sentence_bleu,
    subset_bleu,
)
from .rerank import CandidateSet, MatchConfig, RankedEntityList, select_best
from .textkit import Tokenizer

REPORT_VERSION = 1
DEFAULT_KS = (1, 2, 5, 10, 20)


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class BoundCurve:
    ks: tuple
    upper: tuple
    lower: tuple

    def __post_init__(self):
        if any(u < l for u, l in zip(self.upper, self.lower)):
            raise AnalysisError("upper bound below lower bound")

    def to_json(self) -> dict:
        return {"ks": list(self.ks), "upper": list(self.upper), "lower": list(self.lower)}


def _climb(stats: np.ndarray, k: int, start: np.ndarray, sign: float, max_n: int) -> np.ndarray:
    """Single-swap local search on corpus BLEU over the first ``k`` candidates.

    ``sign`` = +1 maximizes, -1 minimizes. Only strict improvements are taken,
    so the result is never worse than ``start``.
    """
    sel = start.copy()
    rows = np.arange(len(sel))
    totals = stats[rows, sel].sum(axis=0)
    current = sign * bleu_from_stats(totals, max_n)
    improved = True
    while improved:
        improved = False
        for i in rows:
            base = totals - stats[i, sel[i]]
            for c in range(k):
                if c == sel[i]:
                    continue
                value = sign * bleu_from_stats(base + stats[i, c], max_n)
                if value > current:
                    totals, current, sel[i] = base + stats[i, c], value, c
                    base = totals - stats[i, c]
                    improved = True
    return sel


def oracle_bounds(sets: Sequence[CandidateSet], refs: Sequence[Sequence[str]],
                  ks: Sequence[int] = DEFAULT_KS, tokenizer: Tokenizer | None = None,
                  max_n: int = 4, warm_starts: Mapping[int, Sequence[int]] | None = None) -> BoundCurve:
    """Best and worst corpus BLEU attainable by choosing one of the first k candidates per instance.

    Each instance starts from its sentence-BLEU argmax (argmin); the selection
    is then refined by local search on corpus BLEU, warm-started from the
    previous k so that the curves are monotone over nested pools.

    ``warm_starts`` maps k to a known selection (one candidate index per
    instance, each below k), e.g. a reranker's picks. It is used as an extra
    starting point, so the bounds always bracket that selection.
    """
    tokenizer = tokenizer or Tokenizer()
    ks = sorted(set(ks))
    if len(sets) != len(refs) or not sets:
        raise AnalysisError("need one reference per candidate set")
    need = ks[-1]
    short = [s.instance_ref for s in sets if len(s) < need]
    if short:
        raise AnalysisError(f"{len(short)} candidate sets have fewer than {need} candidates")

    n = len(sets)
    hyps = [[tokenizer(c) for c in s.candidates[:need]] for s in sets]
    stats = np.array([[bleu_stats(h, r, max_n) for h in hs] for hs, r in zip(hyps, refs)])
    sent = np.array([[sentence_bleu(h, r, max_n) for h in hs] for hs, r in zip(hyps, refs)])
    rows = np.arange(n)

    def corpus(sel):
        return bleu_from_stats(stats[rows, sel].sum(axis=0), max_n)

    upper, lower = [], []
    prev_hi = prev_lo = None
    for k in ks:
        starts = [np.asarray(prev) for prev in (prev_hi, prev_lo) if prev is not None]
        if warm_starts and k in warm_starts:
            known = np.asarray(warm_starts[k], dtype=np.intp)
            if known.shape != (n,) or known.min() < 0 or known.max() >= k:
                raise AnalysisError(f"warm start for k={k} must pick one of the first {k} candidates per instance")
            starts.append(known)
        hi = max([np.argmax(sent[:, :k], axis=1), *starts], key=corpus)
        lo = min([np.argmin(sent[:, :k], axis=1), *starts], key=corpus)
        hi = _climb(stats, k, hi, +1.0, max_n)
        lo = _climb(stats, k, lo, -1.0, max_n)
        upper.append(corpus(hi))
        lower.append(corpus(lo))
        prev_hi, prev_lo = hi, lo
    return BoundCurve(tuple(ks), tuple(upper), tuple(lower))


def rerank_curve(sets: Sequence[CandidateSet], refs: Sequence[Sequence[str]],
                 cited: Sequence[RankedEntityList], ks: Sequence[int] = DEFAULT_KS,
                 cfg: MatchConfig = MatchConfig(), tokenizer: Tokenizer | None = None,
                 max_n: int = 4) -> tuple[dict, dict]:
    """Entity-MRR selections over the first k candidates and their corpus BLEU, per k."""
    tokenizer = tokenizer or Tokenizer()
    picks, bleu = {}, {}
    for k in sorted(set(ks)):
        chosen = []
        for s, ents in zip(sets, cited):
            ann = None if s.candidate_entities is None else s.candidate_entities[:k]
            chosen.append(select_best(CandidateSet(s.instance_ref, s.candidates[:k], ann), ents, cfg, tokenizer)[0])
        picks[k] = chosen
        bleu[k] = corpus_bleu([EvalPair(tokenizer(s.candidates[c]), r) for s, c, r in zip(sets, chosen, refs)], max_n)
    return picks, bleu


def exhaustive_bounds(sets: Sequence[CandidateSet], refs, k: int, tokenizer: Tokenizer | None = None,
                      max_n: int = 4) -> tuple[float, float]:
    """Global corpus-BLEU max and min over every selection (exponential; tiny inputs only)."""
    tokenizer = tokenizer or Tokenizer()
    hyps = [[tokenizer(c) for c in s.candidates[:k]] for s in sets]
    values = [corpus_bleu([EvalPair(hyps[i][c], refs[i]) for i, c in enumerate(choice)], max_n)
              for choice in itertools.product(range(k), repeat=len(sets))]
    return max(values), min(values)


@dataclass(frozen=True)
class AutocompleteResult:
    bleu: float
    n_scored: int
    n_skipped: int

    def to_json(self) -> dict:
        return {"bleu": self.bleu, "n_scored": self.n_scored, "n_skipped": self.n_skipped}


def autocomplete_eval(items: Sequence[tuple[Sequence[str], str]], prefix_len: int = 3,
                      tokenizer: Tokenizer | None = None) -> AutocompleteResult:
    """Corpus BLEU of completions against the gold sentence minus its first ``prefix_len`` tokens.

    Gold sentences not longer than the prefix are skipped and counted.
    """
    tokenizer = tokenizer or Tokenizer()
    pairs, skipped = [], 0
    for gold, completion in items:
        gold = list(gold)
        if len(gold) <= prefix_len:
            skipped += 1
            continue
        hyp = tokenizer(completion) if isinstance(completion, str) else list(completion)
        pairs.append(EvalPair(hyp, gold[prefix_len:]))
    if not pairs:
        raise AnalysisError("every gold sentence is too short for the prefix")
    return AutocompleteResult(corpus_bleu(pairs), len(pairs), skipped)


def system_row(pairs: Sequence[EvalPair]) -> dict:
    try:
        acl = subset_bleu(pairs)
    except MetricError:
        acl = None
    return {
        "bleu": corpus_bleu(pairs),
        "acl_bleu": acl,
        "rouge1": rouge_n(pairs, 1)[2],
        "rouge2": rouge_n(pairs, 2)[2],
        "rougeL": rouge_l(pairs)[2],
        "n": len(pairs),
    }


def significance_matrix(systems: Mapping[str, Sequence[EvalPair]], iterations: int = 100,
                        sample_size: int = 1000, seed: int = 0) -> dict:
    """Pairwise bootstrap BLEU comparisons on the instances every system covers."""
    names = sorted(systems)
    by_ref = {s: {p.instance_ref: p for p in systems[s]} for s in names}
    shared = sorted(set.intersection(*(set(v) for v in by_ref.values()))) if names else []
    if not shared:
        return {}
    stats = {s: np.array([bleu_stats(by_ref[s][i].hypothesis, by_ref[s][i].reference) for i in shared])
             for s in names}
    n_comparisons = len(names) * (len(names) - 1)
    out = {}
    for a, b in itertools.permutations(names, 2):
        diff, p = bootstrap_compare(stats[a], stats[b], iterations, sample_size, seed, bleu_statistic())
        out[f"{a} > {b}"] = {"mean_diff": diff, "p": p, "p_bonferroni": bonferroni(p, n_comparisons)}
    return out


def _key(pair) -> str:
    return f"{pair[0]}/{pair[1]}"


def build_report(systems: Mapping[str, Sequence[EvalPair]], *, seed: int = 0, iterations: int = 100,
                 sample_size: int = 1000, overlap: Mapping[str, float] | None = None,
                 bounds: BoundCurve | None = None, rerank_bleu: Mapping[int, float] | None = None,
                 judgments=None, autocomplete: AutocompleteResult | None = None) -> dict:
    """Collect every evaluation result into one JSON-serializable document."""
    if not systems:
        raise AnalysisError("no systems to report")
    report = {
        "version": REPORT_VERSION,
        "seed": seed,
        "systems": {name: system_row(pairs) for name, pairs in sorted(systems.items())},
        "significance": significance_matrix(systems, iterations, sample_size, seed),
    }
    if overlap:
        report["overlap"] = dict(sorted(overlap.items()))
    if bounds is not None:
        report["bounds"] = bounds.to_json()
        if rerank_bleu:
            report["bounds"]["rerank"] = {str(k): v for k, v in sorted(rerank_bleu.items())}
    if judgments:
        per_output = {}
        for metric in ("bleu", "rougeL"):
            per_output[metric] = {
                name: {p.instance_ref: (sentence_bleu(p.hypothesis, p.reference) if metric == "bleu"
                                        else rouge_l([p])[2]) for p in pairs}
                for name, pairs in systems.items()}
        report["human"] = {
            "rates": {_key(k): v for k, v in judgment_rates(judgments).items()},
            "correlation": {metric: {_key(k): v for k, v in judgment_correlations(judgments, sc).items()}
                            for metric, sc in per_output.items()},
        }
    if autocomplete is not None:
        report["autocomplete"] = autocomplete.to_json()
    return report


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _fmt(x, spec=".2f") -> str:
    return "-" if x is None else format(x, spec)


def render_text(report: dict) -> str:
    lines = ["Automatic evaluation", ""]
    header = f"{'system':<28}{'BLEU':>8}{'ACL-BLEU':>10}{'R-1':>8}{'R-2':>8}{'R-L':>8}{'n':>7}"
    lines += [header, "-" * len(header)]
    for name, row in report["systems"].items():
        lines.append(f"{name:<28}{_fmt(row['bleu']):>8}{_fmt(row['acl_bleu']):>10}"
                     f"{_fmt(row['rouge1'], '.3f'):>8}{_fmt(row['rouge2'], '.3f'):>8}"
                     f"{_fmt(row['rougeL'], '.3f'):>8}{row['n']:>7}")
    if report["significance"]:
        lines += ["", "Bootstrap BLEU comparisons (one-sided, Bonferroni-corrected)"]
        for name, cell in report["significance"].items():
            lines.append(f"  {name:<48} diff={cell['mean_diff']:+.3f}  p={cell['p']:.3f}"
                         f"  p_adj={cell['p_bonferroni']:.3f}")
    if "overlap" in report:
        lines += ["", "Token overlap with gold (%)"]
        lines += [f"  {name:<40}{value:>8.2f}" for name, value in report["overlap"].items()]
    if "bounds" in report:
        b = report["bounds"]
        lines += ["", "Oracle BLEU bounds", f"  {'k':>4}{'lower':>10}{'upper':>10}{'rerank':>10}"]
        rr = b.get("rerank", {})
        for k, lo, hi in zip(b["ks"], b["lower"], b["upper"]):
            lines.append(f"  {k:>4}{lo:>10.2f}{hi:>10.2f}{_fmt(rr.get(str(k))):>10}")
    if "human" in report:
        lines += ["", "Human judgments (% yes)"]
        for key, cell in report["human"]["rates"].items():
            lines.append(f"  {key:<32}{cell['yes_pct']:>8.1f}  (n={cell['n']})")
        lines += ["", "Point-biserial correlation with judgments"]
        for metric, cells in report["human"]["correlation"].items():
            for key, cell in cells.items():
                lines.append(f"  {metric:<7}{key:<32} r={_fmt(cell['r'], '+.3f')}"
                             f"  p_adj={_fmt(cell['p_bonferroni'], '.3f')}  (n={cell['n']})")
    if "autocomplete" in report:
        a = report["autocomplete"]
        lines += ["", f"Auto-completion BLEU: {a['bleu']:.2f} ({a['n_scored']} scored, {a['n_skipped']} skipped)"]
    return "\n".join(lines) + "\n"
