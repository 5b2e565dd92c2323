"""Corpus and sentence BLEU with brevity penalty.

Single-reference, 4-gram BLEU. Orders for which the hypothesis side has no
n-grams at all (corpus-wide total of zero) are dropped from the geometric
mean rather than zeroing the score; an order with candidates but no matches
still yields 0. Sentence BLEU add-one smooths the higher orders so MERT gets
a usable signal on short segments.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

MAX_ORDER = 4

Tokens = Sequence[str]


def _ngrams(tokens: Tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _lower(tokens: Tokens) -> list[str]:
    return [t.lower() for t in tokens]


@dataclass
class BleuStats:
    """Sufficient statistics: per-order clipped matches and totals, lengths."""

    matches: list[int]
    totals: list[int]
    hyp_len: int
    ref_len: int

    @classmethod
    def zero(cls) -> "BleuStats":
        return cls([0] * MAX_ORDER, [0] * MAX_ORDER, 0, 0)

    def add(self, other: "BleuStats") -> "BleuStats":
        return BleuStats(
            [a + b for a, b in zip(self.matches, other.matches)],
            [a + b for a, b in zip(self.totals, other.totals)],
            self.hyp_len + other.hyp_len,
            self.ref_len + other.ref_len,
        )


def sentence_stats(hyp: Tokens, ref: Tokens) -> BleuStats:
    matches, totals = [], []
    for n in range(1, MAX_ORDER + 1):
        hyp_counts = _ngrams(hyp, n)
        ref_counts = _ngrams(ref, n)
        matches.append(sum(min(c, ref_counts[g]) for g, c in hyp_counts.items()))
        totals.append(max(len(hyp) - n + 1, 0))
    return BleuStats(matches, totals, len(hyp), len(ref))


def bleu_from_stats(stats: BleuStats) -> float:
    if stats.hyp_len == 0:
        return 0.0
    log_sum = 0.0
    active = 0
    for m, t in zip(stats.matches, stats.totals):
        if t == 0:
            continue
        if m == 0:
            return 0.0
        log_sum += math.log(m / t)
        active += 1
    if active == 0:
        return 0.0
    bp = 1.0 if stats.hyp_len > stats.ref_len else math.exp(1.0 - stats.ref_len / stats.hyp_len)
    return 100.0 * bp * math.exp(log_sum / active)


@dataclass
class BleuReport:
    bleu: float
    precisions: list[float | None]
    brevity_penalty: float
    hyp_len: int
    ref_len: int
    cased: bool

    def format(self) -> str:
        precs = "/".join("-" if p is None else "%.1f" % (100 * p) for p in self.precisions)
        return "BLEU = %.2f  %s  (BP=%.3f, hyp_len=%d, ref_len=%d, %s)" % (
            self.bleu,
            precs,
            self.brevity_penalty,
            self.hyp_len,
            self.ref_len,
            "cased" if self.cased else "uncased",
        )


def corpus_bleu(hyps: Sequence[Tokens], refs: Sequence[Tokens], cased: bool = False) -> BleuReport:
    """Standard 4-gram corpus BLEU against a single reference per hypothesis."""
    if len(hyps) != len(refs):
        raise ValueError("hypothesis/reference count mismatch: %d vs %d" % (len(hyps), len(refs)))
    if not hyps:
        raise ValueError("empty evaluation corpus")
    total = BleuStats.zero()
    for hyp, ref in zip(hyps, refs):
        h = list(hyp) if cased else _lower(hyp)
        r = list(ref) if cased else _lower(ref)
        total = total.add(sentence_stats(h, r))
    precisions: list[float | None] = [
        (m / t if t > 0 else None) for m, t in zip(total.matches, total.totals)
    ]
    bp = 1.0
    if total.hyp_len == 0:
        bp = 0.0
    elif total.hyp_len <= total.ref_len:
        bp = math.exp(1.0 - total.ref_len / total.hyp_len)
    return BleuReport(bleu_from_stats(total), precisions, bp, total.hyp_len, total.ref_len, cased)


def sentence_bleu(hyp: Tokens, ref: Tokens) -> float:
    """Smoothed sentence BLEU: add-one on orders 2..4 when they have no match."""
    if len(hyp) == 0:
        return 0.0
    stats = sentence_stats(hyp, ref)
    log_sum = 0.0
    for n, (m, t) in enumerate(zip(stats.matches, stats.totals), start=1):
        if n == 1:
            if m == 0:
                return 0.0
            log_sum += math.log(m / t)
        else:
            if m == 0:
                log_sum += math.log(1.0 / (t + 1))
            else:
                log_sum += math.log(m / t)
    bp = 1.0 if stats.hyp_len > stats.ref_len else math.exp(1.0 - stats.ref_len / stats.hyp_len)
    return 100.0 * bp * math.exp(log_sum / MAX_ORDER)
