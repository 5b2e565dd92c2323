"""Interpolated Kneser-Ney n-gram language model with ARPA text serialization.

Estimation uses one absolute discount per order, D = n1/(n1 + 2*n2) from the
count-of-counts of that order's numerator counts. Lower orders are estimated
from continuation counts, except n-grams starting with the sentence marker,
which keep their raw counts (nothing can precede <s>, so continuation counts
would flatten sentence-initial statistics). The unknown word receives the
unigram interpolation mass. Denominators are marginal sums of the numerator
counts, which keeps every context distribution normalized exactly.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Sentence

log = logging.getLogger(__name__)

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

Gram = tuple[str, ...]


@dataclass
class NgramCounts:
    """Raw n-gram counts, orders 1..order, over <s>-padded, </s>-terminated text."""

    order: int
    raw: list[Counter]  # raw[k] holds k-gram counts; raw[0] unused

    def total_sentences(self) -> int:
        return self.raw[1][(EOS,)]


def count_ngrams(corpus: Iterable[Sentence | Sequence[str]], order: int) -> NgramCounts:
    if order < 1:
        raise ValueError("order must be >= 1")
    raw: list[Counter] = [Counter() for _ in range(order + 1)]
    for sent in corpus:
        tokens = list(sent.tokens if isinstance(sent, Sentence) else sent)
        padded = [BOS] * (order - 1) + tokens + [EOS]
        for n in range(1, order + 1):
            counts = raw[n]
            for i in range(len(padded) - n + 1):
                counts[tuple(padded[i : i + n])] += 1
    return NgramCounts(order, raw)


def _discount(numerators: Iterable[int], order: int) -> float:
    n1 = n2 = 0
    for c in numerators:
        if c == 1:
            n1 += 1
        elif c == 2:
            n2 += 1
    if n1 == 0 and n2 == 0:
        log.warning("order %d has no singleton/doubleton counts; falling back to D=0.5", order)
        return 0.5
    d = n1 / (n1 + 2 * n2)
    if not 0.0 < d < 1.0:
        log.warning("order %d discount %.3f degenerate; falling back to D=0.5", order, d)
        return 0.5
    return d


@dataclass
class ArpaLM:
    """Backoff representation of an interpolated Kneser-Ney model.

    ``entries[k]`` maps each k-gram to (log10 prob, log10 backoff). Backoff is
    None where the gram is not a context; prob is None for placeholder
    context-only entries (written as -99 in ARPA files).
    """

    order: int
    entries: list[dict[Gram, tuple[float | None, float | None]]]
    vocab: set[str] = field(default_factory=set)  # predictable words incl. </s> and <unk>

    def logprob(self, word: str, context: Gram) -> float:
        """log10 P(word | context) with standard backoff chaining."""
        if word not in self.vocab:
            word = UNK
        context = context[max(0, len(context) - (self.order - 1)) :]
        backoff_acc = 0.0
        for k in range(len(context), -1, -1):
            ctx = context[len(context) - k :]
            hit = self.entries[k + 1].get(ctx + (word,)) if k + 1 <= self.order else None
            if hit is not None and hit[0] is not None:
                return backoff_acc + hit[0]
            ctx_entry = self.entries[k].get(ctx) if k >= 1 else None
            if ctx_entry is not None and ctx_entry[1] is not None:
                backoff_acc += ctx_entry[1]
        raise RuntimeError("no unigram entry for %r; model is malformed" % word)

    def begin_context(self) -> Gram:
        return (BOS,) * (self.order - 1)

    def advance(self, context: Gram, word: str) -> Gram:
        if self.order == 1:
            return ()
        stored = word if word in self.vocab else UNK
        return (context + (stored,))[-(self.order - 1) :]


def estimate_kn(counts: NgramCounts) -> ArpaLM:
    """Interpolated Kneser-Ney, converted to the ARPA backoff representation."""
    order = counts.order

    # numerator counts per order: raw at the top, continuation below
    # (raw for <s>-initial grams, which have no left context)
    numer: list[dict[Gram, int]] = [dict() for _ in range(order + 1)]
    numer[order] = {g: c for g, c in counts.raw[order].items() if g[-1] != BOS}
    for k in range(order - 1, 0, -1):
        cont: dict[Gram, set] = defaultdict(set)
        for g in counts.raw[k + 1]:
            if g[-1] != BOS:
                cont[g[1:]].add(g[0])
        table: dict[Gram, int] = {}
        for g, c in counts.raw[k].items():
            if g[-1] == BOS:
                continue
            if g[0] == BOS:
                table[g] = c
            else:
                table[g] = len(cont[g])
        numer[k] = table

    discounts = [0.0] * (order + 1)
    for k in range(1, order + 1):
        discounts[k] = _discount(numer[k].values(), k)

    # context marginals and distinct-extension counts
    marginal: list[dict[Gram, int]] = [dict() for _ in range(order + 1)]
    fanout: list[dict[Gram, int]] = [dict() for _ in range(order + 1)]
    for k in range(1, order + 1):
        marg: dict[Gram, int] = defaultdict(int)
        fan: dict[Gram, int] = defaultdict(int)
        for g, c in numer[k].items():
            marg[g[:-1]] += c
            fan[g[:-1]] += 1
        marginal[k] = dict(marg)
        fanout[k] = dict(fan)

    vocab = {w for (w,) in numer[1]} | {EOS, UNK}
    vocab.discard(BOS)

    # interpolated probabilities, built bottom-up; unigram interpolates into <unk>
    prob: list[dict[Gram, float]] = [dict() for _ in range(order + 1)]
    d1 = discounts[1]
    total1 = marginal[1][()]
    gamma1 = d1 * fanout[1][()] / total1
    for g, c in numer[1].items():
        prob[1][g] = max(c - d1, 0.0) / total1 + (gamma1 if g == (UNK,) else 0.0)
    prob[1][(UNK,)] = prob[1].get((UNK,), 0.0) + (gamma1 if (UNK,) not in numer[1] else 0.0)

    gammas: list[dict[Gram, float]] = [dict() for _ in range(order + 1)]
    gammas[1] = {(): gamma1}
    for k in range(2, order + 1):
        dk = discounts[k]
        gam: dict[Gram, float] = {}
        for h, total in marginal[k].items():
            gam[h] = dk * fanout[k][h] / total
        gammas[k] = gam
        for g, c in numer[k].items():
            h = g[:-1]
            # the suffix of any occurring gram occurs, so it is always present
            # one order down (as a continuation gram or an <s>-initial raw gram)
            lower = prob[k - 1][g[1:]]
            prob[k][g] = max(c - dk, 0.0) / marginal[k][h] + gam[h] * lower

    entries: list[dict[Gram, tuple[float | None, float | None]]] = [
        dict() for _ in range(order + 1)
    ]
    for k in range(1, order + 1):
        for g, p in prob[k].items():
            if p <= 0.0:
                raise AssertionError("nonpositive probability for %r" % (g,))
            entries[k][g] = (math.log10(p), None)
    # backoff weights attach to contexts of the next order up
    for k in range(1, order):
        for h, gamma in gammas[k + 1].items():
            lp, _ = entries[k].get(h, (None, None))
            entries[k][h] = (lp, math.log10(gamma))
    # <s> placeholder so the token is a legal ARPA unigram
    if order >= 2 or (BOS,) in entries[1]:
        lp, bo = entries[1].get((BOS,), (None, None))
        entries[1][(BOS,)] = (None, bo)

    return ArpaLM(order, entries, vocab)


def score_sentence(lm: ArpaLM, sent: Sentence | Sequence[str]) -> float:
    """Sum of conditional log10 probabilities, including the </s> transition."""
    tokens = list(sent.tokens if isinstance(sent, Sentence) else sent)
    context = lm.begin_context()
    total = 0.0
    for tok in tokens + [EOS]:
        total += lm.logprob(tok, context)
        context = lm.advance(context, tok)
    return total


def perplexity(lm: ArpaLM, corpus: Iterable[Sentence | Sequence[str]]) -> float:
    total_logprob = 0.0
    total_tokens = 0
    for sent in corpus:
        tokens = sent.tokens if isinstance(sent, Sentence) else sent
        total_logprob += score_sentence(lm, tokens)
        total_tokens += len(tokens) + 1  # </s> predicted, <s> not
    if total_tokens == 0:
        raise ValueError("perplexity of an empty corpus is undefined")
    return 10.0 ** (-total_logprob / total_tokens)


def write_arpa(lm: ArpaLM, path: str | Path) -> None:
    """Standard ARPA text format; floats use repr so reading back is exact."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\\data\\\n")
        for k in range(1, lm.order + 1):
            fh.write("ngram %d=%d\n" % (k, len(lm.entries[k])))
        for k in range(1, lm.order + 1):
            fh.write("\n\\%d-grams:\n" % k)
            for g in sorted(lm.entries[k]):
                lp, bo = lm.entries[k][g]
                fields = [repr(lp) if lp is not None else "-99", " ".join(g)]
                if bo is not None:
                    fields.append(repr(bo))
                fh.write("\t".join(fields) + "\n")
        fh.write("\n\\end\\\n")


def read_arpa(path: str | Path) -> ArpaLM:
    declared: dict[int, int] = {}
    entries: list[dict[Gram, tuple[float | None, float | None]]] = []
    order = 0
    with open(path, encoding="utf-8") as fh:
        section = None
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line == "\\data\\":
                continue
            if line == "\\end\\":
                break
            if line.startswith("ngram "):
                k, n = line[len("ngram ") :].split("=")
                declared[int(k)] = int(n)
                continue
            if line.startswith("\\") and line.endswith("-grams:"):
                section = int(line[1:].split("-")[0])
                order = max(order, section)
                while len(entries) <= order:
                    entries.append(dict())
                continue
            if section is None:
                raise ValueError("line %d: data before any n-gram section" % lineno)
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise ValueError("line %d: expected 2 or 3 tab-separated fields" % lineno)
            lp = None if parts[0] == "-99" else float(parts[0])
            gram = tuple(parts[1].split(" "))
            bo = float(parts[2]) if len(parts) == 3 else None
            if len(gram) != section:
                raise ValueError("line %d: %d-gram in \\%d-grams: section" % (lineno, len(gram), section))
            entries[section][gram] = (lp, bo)
    for k, n in declared.items():
        if len(entries[k]) != n:
            raise ValueError("declared %d %d-grams, found %d" % (n, k, len(entries[k])))
    vocab = {w for (w,) in entries[1]} | {UNK}
    vocab.discard(BOS)
    return ArpaLM(order, entries, vocab)
