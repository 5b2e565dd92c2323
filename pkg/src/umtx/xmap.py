"""Self-learning orthogonal mapping between two monolingual embedding spaces.

The core loop alternates an orthogonal Procrustes solve on the current
dictionary with nearest-neighbor dictionary induction over the mapped
spaces, keeping the best mean-cosine iterate. CSLS retrieval is available
for the final dictionary and downstream phrase-table induction, where hub
penalization matters more than inside the loop.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .phrasevec import EmbeddingMatrix, PhraseVocab

log = logging.getLogger(__name__)


@dataclass
class SeedDictionary:
    pairs: list[tuple[int, int]]
    provenance: str = "user-supplied"  # identical-tokens | numerals | frequency | user-supplied

    def __post_init__(self):
        srcs = [s for s, _ in self.pairs]
        if len(set(srcs)) != len(srcs):
            raise ValueError("seed dictionary has duplicate source entries")

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass
class MappingSolution:
    wx: np.ndarray
    wz: np.ndarray
    final_dictionary: list[tuple[int, int]]
    objective_trace: list[float] = field(default_factory=list)


def normalize_embeddings(m: EmbeddingMatrix) -> EmbeddingMatrix:
    """Unit rows with mean-centered columns, unit rows again.

    Renormalizing after centering perturbs the column means, so the
    center+renormalize pair is iterated to its fixpoint; that makes the
    whole operation idempotent to tight tolerance.
    """
    rows = np.asarray(m.rows, dtype=np.float64)

    def unit(r: np.ndarray, stage: str) -> np.ndarray:
        norms = np.linalg.norm(r, axis=1)
        zero = np.nonzero(norms == 0.0)[0]
        if len(zero):
            idx = int(zero[0])
            name = m.labels[idx] if m.labels else "#%d" % idx
            raise ValueError("zero embedding row for %r (%s)" % (name, stage))
        return r / norms[:, None]

    rows = unit(rows, "input")
    for _ in range(100):
        mean = rows.mean(axis=0)
        if np.linalg.norm(mean) < 1e-13:
            break
        rows = unit(rows - mean, "after centering")
    return EmbeddingMatrix(rows, "centered+unit", m.labels)


def solve_procrustes(
    x: np.ndarray, z: np.ndarray, seed: SeedDictionary
) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal transform pair maximizing summed dictionary cosine.

    By convention the target side stays fixed (Wz = I) and the source
    rotation Wx = U V^T comes from the SVD of the dictionary-restricted
    cross-covariance.
    """
    if len(seed) == 0:
        raise ValueError("cannot solve Procrustes with an empty dictionary")
    si = np.array([s for s, _ in seed.pairs])
    ti = np.array([t for _, t in seed.pairs])
    m = np.asarray(x)[si].T @ np.asarray(z)[ti]
    u, _, vt = np.linalg.svd(m)
    wx = u @ vt
    return wx, np.eye(wx.shape[0])


def _unit(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    norms[norms == 0] = 1e-12
    return m / norms


def _topk_mean(sim_chunk: np.ndarray, k: int) -> np.ndarray:
    k = min(k, sim_chunk.shape[1])
    part = np.partition(sim_chunk, sim_chunk.shape[1] - k, axis=1)[:, -k:]
    return part.mean(axis=1)


def csls_penalties(
    xm: np.ndarray, zm: np.ndarray, k: int, chunk: int = 2048
) -> tuple[np.ndarray, np.ndarray]:
    """Mean cosine of each row's k nearest neighbors in the other space."""
    xn, zn = _unit(np.asarray(xm, float)), _unit(np.asarray(zm, float))
    r_src = np.empty(len(xn))
    for s in range(0, len(xn), chunk):
        r_src[s : s + chunk] = _topk_mean(xn[s : s + chunk] @ zn.T, k)
    r_tgt = np.empty(len(zn))
    for s in range(0, len(zn), chunk):
        r_tgt[s : s + chunk] = _topk_mean(zn[s : s + chunk] @ xn.T, k)
    return r_src, r_tgt


def induce_dictionary(
    xm: np.ndarray,
    zm: np.ndarray,
    method: Literal["nn", "csls"] = "nn",
    csls_k: int = 10,
    chunk: int = 2048,
) -> SeedDictionary:
    """Best target per source row under cosine (nn) or CSLS scoring.

    CSLS score is 2*cos(x,z) - rT(x) - rS(z) with rT/rS the mean cosine of
    each row's csls_k nearest neighbors in the opposite space. No bijection
    is enforced; two sources may share a target.
    """
    xn, zn = _unit(np.asarray(xm, float)), _unit(np.asarray(zm, float))
    if method == "csls":
        if csls_k < 1:
            raise ValueError("csls_k must be >= 1")
        r_src, r_tgt = csls_penalties(xn, zn, csls_k, chunk)
    elif method != "nn":
        raise ValueError("unknown induction method %r" % method)
    pairs = []
    for s in range(0, len(xn), chunk):
        sim = xn[s : s + chunk] @ zn.T
        if method == "csls":
            sim = 2.0 * sim - r_src[s : s + chunk, None] - r_tgt[None, :]
        best = np.argmax(sim, axis=1)
        pairs.extend((s + i, int(t)) for i, t in enumerate(best))
    return SeedDictionary(pairs, "user-supplied")


def _mean_cosine(xm: np.ndarray, zm: np.ndarray, pairs: list[tuple[int, int]]) -> float:
    xn, zn = _unit(np.asarray(xm, float)), _unit(np.asarray(zm, float))
    si = np.array([s for s, _ in pairs])
    ti = np.array([t for _, t in pairs])
    return float(np.einsum("ij,ij->i", xn[si], zn[ti]).mean())


def self_learning_map(
    x: np.ndarray,
    z: np.ndarray,
    seed: SeedDictionary,
    max_iters: int = 50,
    tol: float = 1e-6,
) -> MappingSolution:
    """Alternate Procrustes and dictionary induction, return the best iterate.

    Inputs must already be normalized. The objective is the mean cosine of
    the induced pairs; an iterate is accepted only if it improves the best
    objective seen, so the trace is non-decreasing, and the loop stops when
    improvement falls under ``tol``.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    wx, wz = solve_procrustes(x, z, seed)
    best_obj = -np.inf
    best_wx, best_dict = wx, list(seed.pairs)
    trace: list[float] = []
    for _ in range(max_iters):
        induced = induce_dictionary(x @ wx, z, "nn")
        obj = _mean_cosine(x @ wx, z, induced.pairs)
        if obj - best_obj < tol:
            break
        best_obj = obj
        best_wx, best_dict = wx, induced.pairs
        trace.append(obj)
        wx, wz = solve_procrustes(x, z, SeedDictionary(induced.pairs))
    return MappingSolution(best_wx, np.eye(best_wx.shape[0]), best_dict, trace)


def seed_identical(src_vocab: PhraseVocab, tgt_vocab: PhraseVocab) -> SeedDictionary:
    """Identically spelled entries shared by both vocabularies."""
    tgt_index = tgt_vocab.index_of
    pairs = [
        (e.index, tgt_index[e.phrase]) for e in src_vocab.entries if e.phrase in tgt_index
    ]
    if not pairs:
        raise ValueError("no identically spelled entries between the vocabularies")
    return SeedDictionary(pairs, "identical-tokens")


def seed_numerals(src_vocab: PhraseVocab, tgt_vocab: PhraseVocab) -> SeedDictionary:
    """Identically spelled all-numeral unigrams (dates, figures)."""
    tgt_index = tgt_vocab.index_of
    pairs = []
    for e in src_vocab.entries:
        if e.order == 1 and e.phrase[0].isdigit() and e.phrase in tgt_index:
            pairs.append((e.index, tgt_index[e.phrase]))
    if not pairs:
        raise ValueError("no shared numeral tokens between the vocabularies")
    return SeedDictionary(pairs, "numerals")


def seed_frequency(src_vocab: PhraseVocab, tgt_vocab: PhraseVocab, n: int = 25) -> SeedDictionary:
    """Pair the i-th most frequent source unigram with the i-th target one.

    A weak but fully unsupervised signal: frequency ranks of corresponding
    words are roughly stable across comparable corpora.
    """
    src_uni = src_vocab.unigram_entries()[:n]
    tgt_uni = tgt_vocab.unigram_entries()[:n]
    pairs = [(s.index, t.index) for s, t in zip(src_uni, tgt_uni)]
    if not pairs:
        raise ValueError("empty vocabularies")
    return SeedDictionary(pairs, "frequency")


def dictionary_precision(pairs: list[tuple[int, int]], gold: dict[int, int]) -> float:
    """Fraction of dictionary pairs matching a gold source->target map."""
    hits = sum(1 for s, t in pairs if gold.get(s) == t)
    return hits / len(pairs) if pairs else 0.0
