"""Word alignment: reparameterized IBM Model 2 trained by EM, plus
symmetrization heuristics and AER scoring.

The alignment prior favors the diagonal, exp(-lambda * |i/n - j/m|), with a
fixed null-alignment mass p0; only the translation table is re-estimated, so
EM log-likelihood is monotone. Output follows the Pharaoh "i-j" convention
with 0-based source-target index pairs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence

from .corpus import Bitext

log = logging.getLogger(__name__)

NULL = "<null>"

Link = tuple[int, int]


@dataclass
class Alignment:
    """Set of 0-based (source index, target index) links."""

    links: frozenset[Link]

    def __post_init__(self):
        object.__setattr__(self, "links", frozenset(self.links))

    @classmethod
    def parse(cls, text: str) -> "Alignment":
        links = set()
        for part in text.split():
            i, j = part.split("-")
            links.add((int(i), int(j)))
        return cls(frozenset(links))

    def format(self) -> str:
        return " ".join("%d-%d" % l for l in sorted(self.links))

    def transposed(self) -> "Alignment":
        return Alignment(frozenset((j, i) for i, j in self.links))

    def __len__(self) -> int:
        return len(self.links)


def write_pharaoh(alignments: Iterable[Alignment], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in alignments:
            fh.write(a.format() + "\n")


def read_pharaoh(path: str | Path) -> list[Alignment]:
    with open(path, encoding="utf-8") as fh:
        return [Alignment.parse(line) for line in fh]


@dataclass
class AlignModel:
    """Sparse translation table t(target word | source word) plus prior knobs."""

    table: dict[str, dict[str, float]]
    diag_lambda: float = 4.0
    p0: float = 0.08
    loglik_trace: list[float] = field(default_factory=list)
    skipped_pairs: int = 0

    def prob(self, tgt_word: str, src_word: str) -> float:
        return self.table.get(src_word, {}).get(tgt_word, 0.0)


def _diag_priors(n: int, m: int, diag_lambda: float, p0: float) -> list[list[float]]:
    """priors[j][i] over source positions for each target position; [j][n] is null."""
    priors = []
    for j in range(m):
        weights = [math.exp(-diag_lambda * abs((i + 1) / n - (j + 1) / m)) for i in range(n)]
        z = sum(weights)
        row = [(1.0 - p0) * w / z for w in weights]
        row.append(p0)
        priors.append(row)
    return priors


def train_fastalign(
    bitext: Bitext, iterations: int = 5, diag_lambda: float = 4.0, p0: float = 0.08
) -> AlignModel:
    """EM over the diagonal-prior lexical model; lambda and p0 stay fixed."""
    if iterations < 1:
        raise ValueError("need at least one EM iteration")
    pairs = []
    skipped = 0
    for src, tgt in bitext.pairs():
        if len(src) == 0 or len(tgt) == 0:
            skipped += 1
            continue
        pairs.append((list(src.tokens), list(tgt.tokens)))
    if not pairs:
        raise ValueError("bitext contains no non-empty sentence pairs")
    if skipped:
        log.warning("skipped %d empty sentence pairs", skipped)

    # uniform initialization over observed co-occurrences (plus null row)
    cooc: dict[str, set[str]] = {}
    for src, tgt in pairs:
        for e in tgt:
            cooc.setdefault(NULL, set()).add(e)
            for f in src:
                cooc.setdefault(f, set()).add(e)
    table = {f: {e: 1.0 / len(es) for e in es} for f, es in cooc.items()}

    trace: list[float] = []
    for _ in range(iterations):
        counts: dict[str, dict[str, float]] = {}
        loglik = 0.0
        for src, tgt in pairs:
            n, m = len(src), len(tgt)
            priors = _diag_priors(n, m, diag_lambda, p0)
            for j, e in enumerate(tgt):
                row = priors[j]
                scores = [row[i] * table[src[i]].get(e, 0.0) for i in range(n)]
                scores.append(row[n] * table[NULL].get(e, 0.0))
                z = sum(scores)
                if z <= 0.0:
                    continue
                loglik += math.log(z)
                for i in range(n):
                    if scores[i]:
                        counts.setdefault(src[i], {})
                        counts[src[i]][e] = counts[src[i]].get(e, 0.0) + scores[i] / z
                if scores[n]:
                    counts.setdefault(NULL, {})
                    counts[NULL][e] = counts[NULL].get(e, 0.0) + scores[n] / z
        trace.append(loglik)
        table = {}
        for f, row in counts.items():
            total = sum(row.values())
            table[f] = {e: c / total for e, c in row.items()}
    return AlignModel(table, diag_lambda, p0, trace, skipped)


def align_sentence(model: AlignModel, src: Sequence[str], tgt: Sequence[str]) -> Alignment:
    """Per target position, argmax of prior times lexical probability.

    Null wins ties (it is considered first); null choices produce no link.
    """
    src = list(src)
    tgt = list(tgt)
    if not src or not tgt:
        return Alignment(frozenset())
    priors = _diag_priors(len(src), len(tgt), model.diag_lambda, model.p0)
    links = set()
    for j, e in enumerate(tgt):
        row = priors[j]
        best_i, best_score = -1, row[len(src)] * model.prob(e, NULL)
        for i, f in enumerate(src):
            score = row[i] * model.prob(e, f)
            if score > best_score:
                best_i, best_score = i, score
        if best_i >= 0:
            links.add((best_i, j))
    return Alignment(frozenset(links))


def align_bitext(model: AlignModel, bitext: Bitext) -> list[Alignment]:
    return [align_sentence(model, s.tokens, t.tokens) for s, t in bitext.pairs()]


_NEIGHBORS = [(-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)]

Heuristic = Literal["intersection", "union", "grow-diag-final-and"]


def symmetrize(fwd: Alignment, rev: Alignment, heuristic: Heuristic = "grow-diag-final-and") -> Alignment:
    """Combine two alignments expressed over the same (src, tgt) index space."""
    a, b = fwd.links, rev.links
    if heuristic == "intersection":
        return Alignment(a & b)
    if heuristic == "union":
        return Alignment(a | b)
    if heuristic != "grow-diag-final-and":
        raise ValueError("unknown symmetrization heuristic %r" % heuristic)

    union = a | b
    current = set(a & b)
    aligned_src = {i for i, _ in current}
    aligned_tgt = {j for _, j in current}
    # grow-diag: absorb union neighbors touching an unaligned word
    changed = True
    while changed:
        changed = False
        for i, j in sorted(current):
            for di, dj in _NEIGHBORS:
                cand = (i + di, j + dj)
                if cand in union and cand not in current:
                    if cand[0] not in aligned_src or cand[1] not in aligned_tgt:
                        current.add(cand)
                        aligned_src.add(cand[0])
                        aligned_tgt.add(cand[1])
                        changed = True
    # final-and: remaining links whose words are both still unaligned
    for source in (a, b):
        for i, j in sorted(source):
            if (i, j) not in current and i not in aligned_src and j not in aligned_tgt:
                current.add((i, j))
                aligned_src.add(i)
                aligned_tgt.add(j)
    return Alignment(frozenset(current))


def aer(pred: Alignment, gold_sure: Alignment, gold_possible: Alignment | None = None) -> float:
    """Alignment error rate against sure/possible gold links."""
    possible = gold_possible if gold_possible is not None else gold_sure
    if not gold_sure.links <= possible.links:
        raise ValueError("sure links must be a subset of possible links")
    denom = len(pred) + len(gold_sure)
    if denom == 0:
        return 0.0
    hits = len(pred.links & gold_sure.links) + len(pred.links & possible.links)
    return 1.0 - hits / denom
