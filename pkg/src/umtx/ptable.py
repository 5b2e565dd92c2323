"""Phrase tables: induced from mapped embeddings or extracted from aligned
synthetic bitext, with Moses-format interchange.

Unsupervised induction keeps the k nearest target phrases per source phrase
and turns cosines into probabilities with a temperature softmax over the
retained candidates; backward scores come from the reverse-direction
retrieval. Extraction enumerates alignment-consistent phrase pairs and
scores them by relative frequency.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .aligner import Alignment
from .corpus import Bitext, _open
from .phrasevec import EmbeddingMatrix, topk_cosine

Phrase = tuple[str, ...]


@dataclass
class Candidate:
    tgt: Phrase
    fwd: float  # p(tgt | src)
    bwd: float  # p(src | tgt)
    lex_fwd: float | None = None
    lex_bwd: float | None = None


@dataclass
class PhraseTable:
    entries: dict[Phrase, list[Candidate]]
    provenance: str  # unsupervised | extracted

    def candidates(self, src: Phrase) -> list[Candidate]:
        return self.entries.get(src, [])

    def __len__(self) -> int:
        return len(self.entries)

    def max_source_len(self) -> int:
        return max((len(p) for p in self.entries), default=0)


def _labels_to_phrases(m: EmbeddingMatrix) -> list[Phrase]:
    if m.labels is None:
        raise ValueError("embedding matrix carries no phrase labels")
    return [tuple(label.split(" ")) for label in m.labels]


def _retrieval_softmax(
    emb_q: EmbeddingMatrix, emb_t: EmbeddingMatrix, k: int, temperature: float
) -> tuple[np.ndarray, np.ndarray]:
    idx, cos = topk_cosine(np.asarray(emb_q.rows), np.asarray(emb_t.rows), k)
    logits = cos / temperature
    logits -= logits.max(axis=1, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=1, keepdims=True)
    return idx, probs


def induce_unsupervised(
    src_emb: EmbeddingMatrix,
    tgt_emb: EmbeddingMatrix,
    k: int = 100,
    temperature: float = 0.1,
) -> PhraseTable:
    """Nearest-neighbor retrieval plus softmax scores in both directions.

    Forward probabilities normalize over each source phrase's k candidates.
    Backward probabilities are read from the reverse retrieval; a pair the
    reverse retrieval missed gets the minimum softmax value of that target's
    own candidate list.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if temperature <= 0.0:
        raise ValueError("softmax temperature must be positive")
    if src_emb.dim != tgt_emb.dim:
        raise ValueError("embedding spaces differ in dimension: %d vs %d" % (src_emb.dim, tgt_emb.dim))
    src_phrases = _labels_to_phrases(src_emb)
    tgt_phrases = _labels_to_phrases(tgt_emb)

    fwd_idx, fwd_prob = _retrieval_softmax(src_emb, tgt_emb, k, temperature)
    rev_idx, rev_prob = _retrieval_softmax(tgt_emb, src_emb, k, temperature)
    rev_lookup: list[dict[int, float]] = [
        {int(s): float(p) for s, p in zip(rev_idx[t], rev_prob[t])}
        for t in range(len(tgt_phrases))
    ]
    rev_floor = rev_prob.min(axis=1)

    entries: dict[Phrase, list[Candidate]] = {}
    for s, phrase in enumerate(src_phrases):
        cands = []
        for t, p in zip(fwd_idx[s], fwd_prob[s]):
            bwd = rev_lookup[int(t)].get(s, float(rev_floor[int(t)]))
            cands.append(Candidate(tgt_phrases[int(t)], float(p), bwd))
        entries[phrase] = cands
    return PhraseTable(entries, "unsupervised")


@dataclass(frozen=True)
class ExtractedPhrase:
    """One phrase-pair occurrence: sentence index plus half-open spans."""

    sent_index: int
    src_span: tuple[int, int]
    tgt_span: tuple[int, int]
    src: Phrase
    tgt: Phrase


def extract_phrases(
    bitext: Bitext, alignments: Sequence[Alignment], max_phrase_len: int = 3
) -> list[ExtractedPhrase]:
    """All phrase pairs consistent with the alignments.

    A box is consistent when it contains at least one link and no link
    crosses its border; boxes may extend over unaligned target words.
    """
    if len(alignments) != len(bitext):
        raise ValueError("alignment count does not match bitext length")
    out: list[ExtractedPhrase] = []
    for pair_idx, (src, tgt) in enumerate(bitext.pairs()):
        links = sorted(alignments[pair_idx].links)
        n, m = len(src), len(tgt)
        for i, j in links:
            if not (0 <= i < n and 0 <= j < m):
                raise ValueError("link %d-%d out of bounds in pair %d" % (i, j, pair_idx))
        tgt_aligned = [False] * m
        for _, j in links:
            tgt_aligned[j] = True
        for i1 in range(n):
            for i2 in range(i1, min(i1 + max_phrase_len, n)):
                inside = [(i, j) for i, j in links if i1 <= i <= i2]
                if not inside:
                    continue
                j_min = min(j for _, j in inside)
                j_max = max(j for _, j in inside)
                if j_max - j_min + 1 > max_phrase_len:
                    continue
                if any(j_min <= j <= j_max and not i1 <= i <= i2 for i, j in links):
                    continue
                js = j_min
                while True:
                    je = j_max
                    while je - js + 1 <= max_phrase_len:
                        out.append(
                            ExtractedPhrase(
                                pair_idx,
                                (i1, i2 + 1),
                                (js, je + 1),
                                src.tokens[i1 : i2 + 1],
                                tgt.tokens[js : je + 1],
                            )
                        )
                        je += 1
                        if je >= m or tgt_aligned[je]:
                            break
                    js -= 1
                    if js < 0 or tgt_aligned[js] or j_max - js + 1 > max_phrase_len:
                        break
    return out


def score_extracted(
    pairs: Sequence[ExtractedPhrase],
    fwd_lexicon: dict[str, dict[str, float]] | None = None,
    bwd_lexicon: dict[str, dict[str, float]] | None = None,
) -> PhraseTable:
    """Relative-frequency forward/backward scores over extracted occurrences.

    When alignment lexicons are supplied, candidates also carry lexical
    weights: the per-word best translation probability product.
    """
    if not pairs:
        raise ValueError("no extracted phrase pairs to score")
    joint: dict[tuple[Phrase, Phrase], int] = defaultdict(int)
    src_totals: dict[Phrase, int] = defaultdict(int)
    tgt_totals: dict[Phrase, int] = defaultdict(int)
    for p in pairs:
        joint[(p.src, p.tgt)] += 1
        src_totals[p.src] += 1
        tgt_totals[p.tgt] += 1

    def lex_weight(table, given: Phrase, predicted: Phrase) -> float | None:
        if table is None:
            return None
        score = 1.0
        for w in predicted:
            score *= max((table.get(g, {}).get(w, 0.0) for g in given), default=0.0) or 1e-9
        return score

    entries: dict[Phrase, list[Candidate]] = defaultdict(list)
    for (s, t), c in sorted(joint.items()):
        entries[s].append(
            Candidate(
                t,
                c / src_totals[s],
                c / tgt_totals[t],
                lex_weight(fwd_lexicon, s, t),
                lex_weight(bwd_lexicon, t, s),
            )
        )
    for s in entries:
        entries[s].sort(key=lambda cand: (-cand.fwd, cand.tgt))
    return PhraseTable(dict(entries), "extracted")


def write_moses(table: PhraseTable, path: str | Path) -> None:
    """Moses text format: "src ||| tgt ||| fwd bwd [lex_fwd lex_bwd]"."""
    with _open(path, "wt") as fh:
        for src in sorted(table.entries):
            if any("|" in tok for tok in src):
                raise ValueError("source phrase %r contains the reserved '|'" % (src,))
            for cand in table.entries[src]:
                if any("|" in tok for tok in cand.tgt):
                    raise ValueError("target phrase %r contains the reserved '|'" % (cand.tgt,))
                scores = [repr(cand.fwd), repr(cand.bwd)]
                if cand.lex_fwd is not None and cand.lex_bwd is not None:
                    scores += [repr(cand.lex_fwd), repr(cand.lex_bwd)]
                fh.write(
                    "%s ||| %s ||| %s\n" % (" ".join(src), " ".join(cand.tgt), " ".join(scores))
                )


def read_moses(path: str | Path, provenance: str = "extracted") -> PhraseTable:
    entries: dict[Phrase, list[Candidate]] = defaultdict(list)
    with _open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split(" ||| ")
            if len(parts) != 3:
                raise ValueError("line %d: expected 3 ' ||| ' fields" % lineno)
            src = tuple(parts[0].split())
            tgt = tuple(parts[1].split())
            try:
                scores = [float(x) for x in parts[2].split()]
            except ValueError as err:
                raise ValueError("line %d: bad score field (%s)" % (lineno, err)) from None
            if len(scores) == 2:
                entries[src].append(Candidate(tgt, scores[0], scores[1]))
            elif len(scores) == 4:
                entries[src].append(Candidate(tgt, scores[0], scores[1], scores[2], scores[3]))
            else:
                raise ValueError("line %d: expected 2 or 4 scores, got %d" % (lineno, len(scores)))
    return PhraseTable(dict(entries), provenance)
