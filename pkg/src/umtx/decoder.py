"""Phrase-based stack decoder with log-linear scoring.

Hypotheses are organized in stacks by the number of covered source words and
recombined on (coverage, language-model state, end position). Distortion
limit 0 forces monotone decoding; a negative limit disables the constraint.
Source tokens with no single-token table entry are copied verbatim, with an
extra penalty folded into the word-penalty feature. Ties break
lexicographically on the target string everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Sentence
from .ngram_lm import ArpaLM, EOS
from .ptable import PhraseTable

FEATURE_NAMES = ("tm_fwd", "tm_bwd", "lm", "word_penalty", "phrase_penalty", "distortion")
N_FEATURES = len(FEATURE_NAMES)


@dataclass
class FeatureWeights:
    tm_fwd: float = 1.0
    tm_bwd: float = 0.5
    lm: float = 1.0
    word_penalty: float = 0.0
    phrase_penalty: float = 0.0
    distortion: float = 0.3

    def vector(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=float)

    @classmethod
    def from_vector(cls, v: Sequence[float]) -> "FeatureWeights":
        return cls(*(float(x) for x in v))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for name in FEATURE_NAMES:
                fh.write("%s = %r\n" % (name, getattr(self, name)))

    @classmethod
    def load(cls, path: str | Path) -> "FeatureWeights":
        values = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, val = line.partition("=")
                key = key.strip()
                if key not in FEATURE_NAMES:
                    raise ValueError("unknown feature weight %r" % key)
                values[key] = float(val.strip())
        return cls(**values)


@dataclass
class DecodeParams:
    beam_size: int = 100
    distortion_limit: int = 0  # 0 = monotone, negative = unlimited
    nbest_n: int = 1
    unk_word_cost: float = 10.0  # extra virtual words charged for a copied unknown


@dataclass(frozen=True)
class TranslationOption:
    start: int
    end: int
    tgt: tuple[str, ...]
    log_fwd: float
    log_bwd: float
    is_unk: bool = False


@dataclass
class NBestEntry:
    translation: tuple[str, ...]
    features: np.ndarray
    score: float
    spans: tuple[tuple[int, int], ...] = ()


NBestList = list[NBestEntry]


def _collect_options(
    tokens: Sequence[str], table: PhraseTable, params: DecodeParams
) -> dict[tuple[int, int], list[TranslationOption]]:
    max_len = max(table.max_source_len(), 1)
    options: dict[tuple[int, int], list[TranslationOption]] = {}
    for i in range(len(tokens)):
        for j in range(i + 1, min(i + max_len, len(tokens)) + 1):
            cands = table.candidates(tuple(tokens[i:j]))
            if cands:
                options[(i, j)] = [
                    TranslationOption(i, j, c.tgt, math.log10(c.fwd), math.log10(c.bwd))
                    for c in cands
                ]
    for i, tok in enumerate(tokens):
        if (i, i + 1) not in options:
            options[(i, i + 1)] = [TranslationOption(i, i + 1, (tok,), 0.0, 0.0, True)]
    return options


def _lm_phrase_estimate(lm: ArpaLM, tgt: tuple[str, ...]) -> float:
    """Context-free LM estimate used only inside the future-cost heuristic."""
    return sum(lm.logprob(w, ()) for w in tgt)


def _future_costs(
    n: int,
    options: dict[tuple[int, int], list[TranslationOption]],
    lm: ArpaLM,
    w: FeatureWeights,
    params: DecodeParams,
) -> list[list[float]]:
    neg_inf = -math.inf
    cost = [[neg_inf] * (n + 1) for _ in range(n + 1)]
    for (i, j), opts in options.items():
        for o in opts:
            est = (
                w.tm_fwd * o.log_fwd
                + w.tm_bwd * o.log_bwd
                + w.lm * _lm_phrase_estimate(lm, o.tgt)
                + w.word_penalty * -(len(o.tgt) + (params.unk_word_cost if o.is_unk else 0.0))
                + w.phrase_penalty * -1.0
            )
            if est > cost[i][j]:
                cost[i][j] = est
    for span in range(2, n + 1):
        for i in range(0, n - span + 1):
            j = i + span
            for k in range(i + 1, j):
                if cost[i][k] > neg_inf and cost[k][j] > neg_inf:
                    combined = cost[i][k] + cost[k][j]
                    if combined > cost[i][j]:
                        cost[i][j] = combined
    return cost


def _uncovered_cost(coverage: int, n: int, cost: list[list[float]]) -> float:
    total = 0.0
    i = 0
    while i < n:
        if coverage >> i & 1:
            i += 1
            continue
        j = i
        while j < n and not (coverage >> j & 1):
            j += 1
        total += cost[i][j]
        i = j
    return total


@dataclass(slots=True)
class _Hyp:
    coverage: int
    lm_state: tuple
    end: int
    features: tuple
    score: float
    target: tuple
    spans: tuple


def _hyp_sort_key(h: _Hyp):
    return (-h.score, h.target)


def decode(
    src: Sentence | Sequence[str],
    table: PhraseTable,
    lm: ArpaLM,
    weights: FeatureWeights,
    params: DecodeParams | None = None,
) -> NBestList:
    """Beam search over coverage stacks; returns up to nbest_n distinct outputs."""
    params = params or DecodeParams()
    tokens = list(src.tokens if isinstance(src, Sentence) else src)
    n = len(tokens)
    if n == 0:
        return [NBestEntry((), np.zeros(N_FEATURES), 0.0, ())]

    wvec = weights.vector()
    options = _collect_options(tokens, table, params)
    future = _future_costs(n, options, lm, weights, params)
    options_list = sorted(options.items())
    keep = max(1, params.nbest_n)
    dl = params.distortion_limit

    init = _Hyp(0, lm.begin_context(), 0, (0.0,) * N_FEATURES, 0.0, (), ())
    stacks: list[dict[tuple, list[_Hyp]]] = [dict() for _ in range(n + 1)]
    stacks[0][(0, init.lm_state, 0)] = [init]

    full = (1 << n) - 1
    for card in range(n):
        stack = stacks[card]
        if not stack:
            continue
        hyps = [h for bucket in stack.values() for h in bucket]
        hyps.sort(key=lambda h: (-(h.score + _uncovered_cost(h.coverage, n, future)), h.target))
        for hyp in hyps[: params.beam_size]:
            for (i, j), opts in options_list:
                span_mask = ((1 << (j - i)) - 1) << i
                if hyp.coverage & span_mask:
                    continue
                jump = abs(i - hyp.end)
                if dl >= 0 and jump > dl:
                    continue
                for opt in opts:
                    lm_score = 0.0
                    state = hyp.lm_state
                    for word in opt.tgt:
                        lm_score += lm.logprob(word, state)
                        state = lm.advance(state, word)
                    coverage = hyp.coverage | span_mask
                    f = list(hyp.features)
                    f[0] += opt.log_fwd
                    f[1] += opt.log_bwd
                    f[2] += lm_score
                    f[3] -= len(opt.tgt) + (params.unk_word_cost if opt.is_unk else 0.0)
                    f[4] -= 1.0
                    f[5] -= jump
                    if coverage == full:
                        f[2] += lm.logprob(EOS, state)
                    features = tuple(f)
                    score = float(np.dot(wvec, features))
                    new = _Hyp(
                        coverage,
                        state,
                        j,
                        features,
                        score,
                        hyp.target + opt.tgt,
                        hyp.spans + ((i, j),),
                    )
                    sig = (coverage, state, j)
                    bucket = stacks[card + (j - i)].setdefault(sig, [])
                    bucket.append(new)
                    bucket.sort(key=_hyp_sort_key)
                    del bucket[keep:]

    finals = [h for bucket in stacks[n].values() for h in bucket]
    if not finals:
        # distortion limit too tight to complete; retry unrestricted
        relaxed = DecodeParams(params.beam_size, -1, params.nbest_n, params.unk_word_cost)
        return decode(tokens, table, lm, weights, relaxed)
    finals.sort(key=_hyp_sort_key)
    out: NBestList = []
    seen: set[tuple] = set()
    for h in finals:
        if h.target in seen:
            continue
        seen.add(h.target)
        out.append(NBestEntry(h.target, np.asarray(h.features), h.score, h.spans))
        if len(out) >= params.nbest_n:
            break
    return out


def decode_corpus(
    corpus: Sequence[Sentence | Sequence[str]],
    table: PhraseTable,
    lm: ArpaLM,
    weights: FeatureWeights,
    params: DecodeParams | None = None,
) -> list[NBestEntry]:
    """Single-best decode of every sentence, order preserved."""
    return [decode(s, table, lm, weights, params)[0] for s in corpus]


def write_nbest(nbests: dict[int, NBestList], path: str | Path) -> None:
    """"sent_id ||| translation ||| feat1 .. featK ||| score" lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for sent_id in sorted(nbests):
            for entry in nbests[sent_id]:
                feats = " ".join(repr(float(x)) for x in entry.features)
                fh.write(
                    "%d ||| %s ||| %s ||| %s\n"
                    % (sent_id, " ".join(entry.translation), feats, repr(entry.score))
                )


def read_nbest(path: str | Path) -> dict[int, NBestList]:
    out: dict[int, NBestList] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split(" ||| ")
            if len(parts) != 4:
                raise ValueError("line %d: expected 4 ' ||| ' fields" % lineno)
            sent_id = int(parts[0])
            translation = tuple(parts[1].split())
            features = np.array([float(x) for x in parts[2].split()])
            score = float(parts[3])
            out.setdefault(sent_id, []).append(NBestEntry(translation, features, score))
    return out
