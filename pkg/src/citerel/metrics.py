"""Automatic evaluation: BLEU, ROUGE, token overlap, correlation with judgments and bootstrap tests."""

from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats as sps


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class EvalPair:
    hypothesis: tuple
    reference: tuple
    instance_ref: int = 0
    acl_flag: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hypothesis", tuple(self.hypothesis))
        object.__setattr__(self, "reference", tuple(self.reference))
        if not self.reference:
            raise MetricError(f"instance {self.instance_ref}: empty reference")


def _pairs(pairs) -> list[EvalPair]:
    out = [p if isinstance(p, EvalPair) else EvalPair(*p) for p in pairs]
    if not out:
        raise MetricError("no evaluation pairs")
    return out


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


# --- BLEU -------------------------------------------------------------------

def bleu_stats(hyp: Sequence[str], ref: Sequence[str], max_n: int = 4) -> np.ndarray:
    """Sufficient statistics ``[m_1, t_1, ..., m_N, t_N, hyp_len, ref_len]``."""
    row = []
    for n in range(1, max_n + 1):
        h, r = ngrams(hyp, n), ngrams(ref, n)
        row += [sum(min(c, r[g]) for g, c in h.items()), max(len(hyp) - n + 1, 0)]
    row += [len(hyp), len(ref)]
    return np.array(row, dtype=np.float64)


def bleu_from_stats(totals: np.ndarray, max_n: int = 4, smooth: bool = False) -> float:
    c, r = totals[-2], totals[-1]
    if c == 0:
        return 0.0
    log_p = 0.0
    for n in range(max_n):
        m, t = totals[2 * n], totals[2 * n + 1]
        if smooth and n > 0:
            m, t = m + 1, t + 1
        if m == 0 or t == 0:
            return 0.0
        log_p += math.log(m / t)
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    return 100.0 * bp * math.exp(log_p / max_n)


def corpus_bleu(pairs, max_n: int = 4) -> float:
    """Single-reference corpus BLEU (uniform weights, no smoothing), scaled to [0, 100]."""
    pairs = _pairs(pairs)
    totals = sum(bleu_stats(p.hypothesis, p.reference, max_n) for p in pairs)
    return bleu_from_stats(totals, max_n)


def sentence_bleu(hyp: Sequence[str], ref: Sequence[str], max_n: int = 4) -> float:
    """Sentence BLEU with add-one smoothing on the n >= 2 precisions."""
    if not ref:
        raise MetricError("empty reference")
    return bleu_from_stats(bleu_stats(hyp, ref, max_n), max_n, smooth=True)


def subset_bleu(pairs, flag: bool = True, max_n: int = 4) -> float:
    subset = [p for p in _pairs(pairs) if p.acl_flag == flag]
    if not subset:
        raise MetricError(f"no pairs with acl_flag={flag}")
    return corpus_bleu(subset, max_n)


# --- ROUGE ------------------------------------------------------------------

def _prf(overlap: float, n_hyp: float, n_ref: float) -> tuple[float, float, float]:
    p = overlap / n_hyp if n_hyp else 0.0
    r = overlap / n_ref if n_ref else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def rouge_n(pairs, n: int = 1) -> tuple[float, float, float]:
    """Micro-averaged ROUGE-n ``(precision, recall, f1)``."""
    overlap = n_hyp = n_ref = 0
    for p in _pairs(pairs):
        h, r = ngrams(p.hypothesis, n), ngrams(p.reference, n)
        overlap += sum((h & r).values())
        n_hyp += sum(h.values())
        n_ref += sum(r.values())
    return _prf(overlap, n_hyp, n_ref)


def lcs_length(a: Sequence, b: Sequence) -> int:
    """LCS length by the bit-vector recurrence of Allison and Dix."""
    if not a or not b:
        return 0
    masks: dict = {}
    for i, x in enumerate(a):
        masks[x] = masks.get(x, 0) | (1 << i)
    full = (1 << len(a)) - 1
    v = full
    for y in b:
        m = masks.get(y)
        if m is None:
            continue
        u = v & m
        v = ((v + u) | (v - u)) & full
    return len(a) - bin(v).count("1")


def rouge_l(pairs) -> tuple[float, float, float]:
    lcs = n_hyp = n_ref = 0
    for p in _pairs(pairs):
        lcs += lcs_length(p.hypothesis, p.reference)
        n_hyp += len(p.hypothesis)
        n_ref += len(p.reference)
    return _prf(lcs, n_hyp, n_ref)


# --- overlap ----------------------------------------------------------------

def token_overlap(context: Iterable[str], gold: Iterable[str]) -> float:
    """Percentage of distinct gold tokens that also occur in the context."""
    gold = set(gold)
    if not gold:
        raise MetricError("empty gold sentence")
    return 100.0 * len(gold & set(context)) / len(gold)


def mean_token_overlap(items: Iterable[tuple[Iterable[str], Iterable[str]]]) -> float:
    values = [token_overlap(c, g) for c, g in items]
    if not values:
        raise MetricError("no overlap items")
    return float(np.mean(values))


# --- correlation with human judgments ---------------------------------------

def point_biserial(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Point-biserial correlation ``(M1 - M0) / s * sqrt(n1 n0 / n^2)``, s the population std."""
    x = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if x.shape != y.shape:
        raise MetricError(f"length mismatch: {x.size} scores vs {y.size} labels")
    if not np.isin(y, (0, 1)).all():
        raise MetricError("labels must be 0 or 1")
    n1, n0 = int((y == 1).sum()), int((y == 0).sum())
    if n1 == 0 or n0 == 0:
        raise MetricError("both label classes are required")
    s = x.std()
    if s == 0:
        raise MetricError("scores are constant; correlation undefined")
    n = x.size
    return float((x[y == 1].mean() - x[y == 0].mean()) / s * math.sqrt(n1 * n0 / n**2))


def correlation_pvalue(r: float, n: int) -> float:
    """Two-sided p-value of a Pearson-type correlation via the t distribution."""
    if n < 3:
        return 1.0
    if abs(r) >= 1.0:
        return 0.0
    t = r * math.sqrt((n - 2) / (1 - r * r))
    return float(2 * sps.t.sf(abs(t), n - 2))


def bonferroni(p: float, n_comparisons: int) -> float:
    return min(1.0, p * n_comparisons)


@dataclass(frozen=True)
class JudgmentRecord:
    instance_ref: int
    system: str
    dimension: str
    verdict: str


DIMENSIONS = ("correct", "specific", "plausible")
_VERDICTS = {"yes": "yes", "y": "yes", "1": "yes", "no": "no", "n": "no", "0": "no",
             "skip": "skip", "?": "skip", "": "skip"}


def read_judgments(path) -> list[JudgmentRecord]:
    """Read a judgments CSV with columns ``instance,system,dimension,verdict``."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), 2):
            try:
                verdict = _VERDICTS[row["verdict"].strip().lower()]
                dim = row["dimension"].strip().lower()
                if dim not in DIMENSIONS:
                    raise KeyError(dim)
                out.append(JudgmentRecord(int(row["instance"]), row["system"].strip(), dim, verdict))
            except (KeyError, ValueError, AttributeError) as exc:
                raise MetricError(f"judgments line {lineno}: bad value {exc}") from None
    return out


def judgment_rates(records: Iterable[JudgmentRecord]) -> dict:
    """Percent of yes among yes+no per ``(system, dimension)``; skips are ignored."""
    tally: dict = defaultdict(lambda: [0, 0])
    for rec in records:
        if rec.verdict == "skip":
            continue
        tally[rec.system, rec.dimension][0] += rec.verdict == "yes"
        tally[rec.system, rec.dimension][1] += 1
    return {key: {"yes_pct": 100.0 * y / n, "n": n} for key, (y, n) in sorted(tally.items())}


def judgment_correlations(records: Iterable[JudgmentRecord], scores: dict) -> dict:
    """Point-biserial correlation of per-output metric scores with yes/no verdicts.

    ``scores`` maps system -> {instance index -> metric value}. An output judged
    several times contributes its score once per judgment. Cells where the
    correlation is undefined are reported with ``r = None``.
    """
    grouped: dict = defaultdict(lambda: ([], []))
    for rec in records:
        if rec.verdict == "skip" or rec.instance_ref not in scores.get(rec.system, {}):
            continue
        xs, ys = grouped[rec.system, rec.dimension]
        xs.append(scores[rec.system][rec.instance_ref])
        ys.append(1 if rec.verdict == "yes" else 0)
    out = {}
    n_tests = len(grouped)
    for key in sorted(grouped):
        xs, ys = grouped[key]
        try:
            r = point_biserial(xs, ys)
        except MetricError:
            out[key] = {"r": None, "p": None, "p_bonferroni": None, "n": len(xs)}
            continue
        p = correlation_pvalue(r, len(xs))
        out[key] = {"r": r, "p": p, "p_bonferroni": bonferroni(p, n_tests), "n": len(xs)}
    return out


# --- bootstrap significance -------------------------------------------------

def _mean_statistic(rows: np.ndarray) -> float:
    return float(rows.mean())


def bleu_statistic(max_n: int = 4) -> Callable[[np.ndarray], float]:
    """Statistic over resampled rows of :func:`bleu_stats` giving corpus BLEU."""
    return lambda rows: bleu_from_stats(rows.sum(axis=0), max_n)


def bootstrap_compare(scores_a, scores_b, iterations: int = 100, sample_size: int = 1000,
                      seed: int = 0, statistic: Callable[[np.ndarray], float] | None = None
                      ) -> tuple[float, float]:
    """Paired bootstrap test that system A beats system B.

    Each iteration draws ``sample_size`` instance indices with replacement
    (capped at the number of instances) and evaluates ``statistic`` on both
    systems' rows. Returns the mean difference A - B and the fraction of
    iterations in which that difference is not positive.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape or len(a) == 0:
        raise MetricError("bootstrap needs two equal-length, non-empty score arrays")
    statistic = statistic or _mean_statistic
    size = min(sample_size, len(a))
    diffs = np.empty(iterations)
    for it, child in enumerate(np.random.SeedSequence(seed).spawn(iterations)):
        idx = np.random.default_rng(child).integers(0, len(a), size=size)
        diffs[it] = statistic(a[idx]) - statistic(b[idx])
    return float(diffs.mean()), float(np.mean(diffs <= 0))
