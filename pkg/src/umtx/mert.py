"""Minimum Error Rate Training: exact line search over n-best pools.

Each round decodes the dev set, merges the n-best lists into an accumulated
pool, and hill-climbs the weight vector along coordinate plus random
directions using Och's sweep: for one direction, every hypothesis score is a
line in the step size, the per-sentence upper envelopes yield breakpoints,
and corpus BLEU (uncased token BLEU) is evaluated per interval from summed
sufficient statistics. A weight update is accepted only when it beats the
best pool BLEU seen so far, so the accepted sequence is monotone even as the
pool grows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .corpus import Bitext
from .decoder import DecodeParams, FeatureWeights, NBestEntry, decode
from .mteval import BleuStats, bleu_from_stats, sentence_stats
from .ngram_lm import ArpaLM
from .ptable import PhraseTable

log = logging.getLogger(__name__)


@dataclass
class PoolEntry:
    features: np.ndarray
    stats: BleuStats


Pool = list[list[PoolEntry]]  # per sentence, deduped hypotheses


def _pool_bleu(pool: Pool, weights: np.ndarray) -> float:
    """Corpus BLEU of each sentence's best-scoring pool hypothesis."""
    total = BleuStats.zero()
    for entries in pool:
        best = max(entries, key=lambda e: float(weights @ e.features))
        total = total.add(best.stats)
    return bleu_from_stats(total)


def _upper_envelope(slopes: np.ndarray, intercepts: np.ndarray) -> list[tuple[float, int]]:
    """Breakpoints of max_i (slope_i * x + intercept_i) as (x_start, index)."""
    order = np.lexsort((-intercepts, slopes))
    hull: list[tuple[float, int]] = []  # (x where this line takes over, line idx)
    for li in order:
        m, b = slopes[li], intercepts[li]
        while hull:
            mj, bj = slopes[hull[-1][1]], intercepts[hull[-1][1]]
            if m == mj:  # same slope, lower or equal intercept
                break
            x = (bj - b) / (m - mj)
            if x <= hull[-1][0]:
                hull.pop()
            else:
                break
        if hull and slopes[hull[-1][1]] == m:
            continue
        x_start = -np.inf if not hull else (intercepts[hull[-1][1]] - b) / (m - slopes[hull[-1][1]])
        hull.append((x_start, int(li)))
    return hull


def line_search(
    pool: Pool, weights: np.ndarray, direction: np.ndarray
) -> tuple[float, float]:
    """Best step size along ``direction`` and the corpus BLEU it attains."""
    events: list[tuple[float, int, BleuStats, BleuStats]] = []
    total = BleuStats.zero()
    for si, entries in enumerate(pool):
        slopes = np.array([float(direction @ e.features) for e in entries])
        intercepts = np.array([float(weights @ e.features) for e in entries])
        hull = _upper_envelope(slopes, intercepts)
        total = total.add(entries[hull[0][1]].stats)
        for (x, li), (_, prev_li) in zip(hull[1:], hull[:-1]):
            events.append((x, si, entries[prev_li].stats, entries[li].stats))
    events.sort(key=lambda ev: ev[0])

    # sweep intervals left to right; evaluate at each interval midpoint
    best_bleu = bleu_from_stats(total)
    boundaries = [ev[0] for ev in events]
    best_gamma = (boundaries[0] - 1.0) if boundaries else 0.0
    prev_x = None
    for idx, (x, _, old_stats, new_stats) in enumerate(events):
        # apply the switch at x, then evaluate the interval starting here
        total = BleuStats(
            [a - b + c for a, b, c in zip(total.matches, old_stats.matches, new_stats.matches)],
            [a - b + c for a, b, c in zip(total.totals, old_stats.totals, new_stats.totals)],
            total.hyp_len - old_stats.hyp_len + new_stats.hyp_len,
            total.ref_len - old_stats.ref_len + new_stats.ref_len,
        )
        if idx + 1 < len(events) and events[idx + 1][0] == x:
            continue  # more switches at the same abscissa
        bleu = bleu_from_stats(total)
        if bleu > best_bleu:
            right = events[idx + 1][0] if idx + 1 < len(events) else x + 2.0
            best_bleu = bleu
            best_gamma = (x + right) / 2.0
    return best_gamma, best_bleu


def optimize_weights_on_pool(
    pool: Pool,
    initial: np.ndarray,
    random_restarts: int = 20,
    seed: int = 0,
    max_passes: int = 20,
    min_gain: float = 1e-9,
) -> tuple[np.ndarray, float, list[float]]:
    """Hill-climb weights over a fixed pool; returns best weights, BLEU, trace.

    Directions are the coordinate axes plus ``random_restarts`` seeded random
    unit vectors; only strictly improving steps are accepted.
    """
    rng = np.random.default_rng(seed)
    dim = len(initial)
    directions = [np.eye(dim)[i] for i in range(dim)]
    for _ in range(random_restarts):
        d = rng.normal(size=dim)
        directions.append(d / np.linalg.norm(d))

    weights = np.asarray(initial, dtype=float).copy()
    best_bleu = _pool_bleu(pool, weights)
    trace = [best_bleu]
    for _ in range(max_passes):
        best_step: tuple[float, np.ndarray] | None = None
        step_bleu = best_bleu
        for d in directions:
            gamma, bleu = line_search(pool, weights, d)
            if bleu > step_bleu + min_gain:
                step_bleu = bleu
                best_step = (gamma, d)
        if best_step is None:
            break
        gamma, d = best_step
        cand = weights + gamma * d
        norm = np.abs(cand).sum()
        if norm > 0:
            cand = cand / norm  # scale-invariant model, keep weights bounded
        cand_bleu = _pool_bleu(pool, cand)  # realized, not predicted
        if cand_bleu <= best_bleu + min_gain:
            break
        weights, best_bleu = cand, cand_bleu
        trace.append(best_bleu)
    return weights, best_bleu, trace


@dataclass
class MertResult:
    weights: FeatureWeights
    accepted_bleus: list[float] = field(default_factory=list)
    rounds_run: int = 0


def mert_tune(
    devset: Bitext,
    table: PhraseTable,
    lm: ArpaLM,
    initial: FeatureWeights,
    rounds: int = 5,
    nbest_n: int = 50,
    random_restarts: int = 20,
    seed: int = 0,
    beam_size: int = 20,
    distortion_limit: int = 0,
    min_round_gain: float = 0.01,
) -> MertResult:
    """Iterate decode -> merge pool -> line search until BLEU stalls."""
    if len(devset) == 0:
        raise ValueError("cannot tune on an empty dev set")
    refs = [[t.lower() for t in ref.tokens] for ref in devset.tgt]
    if all(len(r) == 0 for r in refs):
        raise ValueError("dev set has only empty references")

    pool: Pool = [[] for _ in range(len(devset))]
    seen: list[set[tuple]] = [set() for _ in range(len(devset))]

    def merge(si: int, entries: Sequence[NBestEntry]) -> None:
        for e in entries:
            if e.translation in seen[si]:
                continue
            seen[si].add(e.translation)
            hyp = [t.lower() for t in e.translation]
            pool[si].append(PoolEntry(np.asarray(e.features, dtype=float), sentence_stats(hyp, refs[si])))

    weights = initial.vector()
    best_weights = weights.copy()
    best_bleu = -1.0
    accepted: list[float] = []
    rounds_run = 0
    for rnd in range(rounds):
        rounds_run += 1
        params = DecodeParams(
            beam_size=beam_size, distortion_limit=distortion_limit, nbest_n=nbest_n
        )
        for si, src in enumerate(devset.src):
            merge(si, decode(src, table, lm, FeatureWeights.from_vector(weights), params))
        new_weights, bleu, _ = optimize_weights_on_pool(
            pool, weights, random_restarts, seed + rnd
        )
        gain = bleu - best_bleu
        if bleu > best_bleu:
            best_bleu = bleu
            best_weights = new_weights.copy()
            weights = new_weights
            accepted.append(bleu)
        log.info("mert round %d: pool BLEU %.2f", rnd + 1, best_bleu)
        if rnd > 0 and gain < min_round_gain:
            break
    return MertResult(FeatureWeights.from_vector(best_weights), accepted, rounds_run)
