"""Phrase vocabulary and skip-gram negative-sampling embeddings.

The vocabulary holds the most frequent unigrams, bigrams and trigrams under
per-order caps. Training treats every vocabulary phrase occurrence as a
center predicting the unigram tokens within ``window`` positions of the
phrase's boundaries, so a token position contributes to its unigram and to
every covering bigram/trigram. Negative samples come from the unigram
distribution raised to 0.75. Updates are applied in deterministic minibatch
order, so a fixed seed reproduces training bit for bit in single-worker mode.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Sentence

log = logging.getLogger(__name__)

MAX_ORDER = 3
VOCAB_VERSION = "umtx-vocab-v1"

Phrase = tuple[str, ...]


@dataclass
class VocabEntry:
    phrase: Phrase
    order: int
    frequency: int
    index: int


@dataclass
class PhraseVocab:
    entries: list[VocabEntry]
    caps: tuple[int, int, int]
    index_of: dict[Phrase, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.index_of:
            self.index_of = {e.phrase: e.index for e in self.entries}

    def __len__(self) -> int:
        return len(self.entries)

    def phrases(self) -> list[Phrase]:
        return [e.phrase for e in self.entries]

    def unigram_entries(self) -> list[VocabEntry]:
        return [e for e in self.entries if e.order == 1]

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("#%s caps=%d,%d,%d\n" % ((VOCAB_VERSION,) + self.caps))
            for e in self.entries:
                fh.write("%s\t%d\t%d\t%d\n" % (" ".join(e.phrase), e.order, e.frequency, e.index))

    @classmethod
    def load(cls, path: str | Path) -> "PhraseVocab":
        entries = []
        with open(path, encoding="utf-8") as fh:
            header = fh.readline()
            if VOCAB_VERSION not in header:
                raise ValueError("unrecognized vocab header: %r" % header.strip())
            caps = tuple(int(x) for x in header.rsplit("caps=", 1)[1].split(","))
            for line in fh:
                phrase, order, freq, index = line.rstrip("\n").split("\t")
                entries.append(VocabEntry(tuple(phrase.split(" ")), int(order), int(freq), int(index)))
        return cls(entries, caps)  # type: ignore[arg-type]


def build_phrase_vocab(
    corpus: Iterable[Sentence | Sequence[str]], caps: tuple[int, int, int] = (200_000, 400_000, 400_000)
) -> PhraseVocab:
    """Count contiguous 1..3-grams and keep the top ``caps[n-1]`` per order.

    Frequency ties break lexicographically on the token tuple. Indices are
    dense: unigrams first, then bigrams, then trigrams.
    """
    if any(c < 1 for c in caps):
        raise ValueError("per-order caps must be positive")
    counts = [Counter() for _ in range(MAX_ORDER + 1)]
    empty = True
    for sent in corpus:
        empty = False
        tokens = list(sent.tokens if isinstance(sent, Sentence) else sent)
        for n in range(1, MAX_ORDER + 1):
            c = counts[n]
            for i in range(len(tokens) - n + 1):
                c[tuple(tokens[i : i + n])] += 1
    if empty:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    entries: list[VocabEntry] = []
    for n in range(1, MAX_ORDER + 1):
        ranked = sorted(counts[n].items(), key=lambda kv: (-kv[1], kv[0]))[: caps[n - 1]]
        for phrase, freq in ranked:
            entries.append(VocabEntry(phrase, n, freq, len(entries)))
    return PhraseVocab(entries, caps)


@dataclass
class SgnsConfig:
    window: int = 5
    dim: int = 300
    negatives: int = 10
    epochs: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 1e-4
    seed: int = 1
    # small batches keep minibatch SGD close to word2vec's per-pair updates;
    # large batches under-train (few steps) and can overshoot on frequent rows
    batch_size: int = 256

    def __post_init__(self):
        if self.window < 1 or self.dim < 1 or self.negatives < 1 or self.epochs < 1:
            raise ValueError("window, dim, negatives and epochs must all be >= 1")


@dataclass
class EmbeddingMatrix:
    """Dense vectors, one row per vocabulary index."""

    rows: np.ndarray
    norm_state: str = "raw"  # raw | unit | centered+unit
    labels: list[str] | None = None

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.rows.shape[0]


def _enumerate_pairs(
    corpus: Iterable[Sentence | Sequence[str]], vocab: PhraseVocab, window: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All (center vocab index, context unigram slot) pairs, in corpus order.

    Returns (centers, contexts, seen) where seen marks vocab entries that
    occurred at least once as a center.
    """
    uni_slot: dict[str, int] = {}
    for slot, e in enumerate(vocab.unigram_entries()):
        uni_slot[e.phrase[0]] = slot
    index_of = vocab.index_of
    centers: list[int] = []
    contexts: list[int] = []
    seen = np.zeros(len(vocab), dtype=bool)
    for sent in corpus:
        tokens = list(sent.tokens if isinstance(sent, Sentence) else sent)
        slots = [uni_slot.get(t, -1) for t in tokens]
        L = len(tokens)
        for i in range(L):
            for n in range(1, MAX_ORDER + 1):
                if i + n > L:
                    break
                vidx = index_of.get(tuple(tokens[i : i + n]))
                if vidx is None:
                    continue
                seen[vidx] = True
                for j in range(max(0, i - window), i):
                    if slots[j] >= 0:
                        centers.append(vidx)
                        contexts.append(slots[j])
                for j in range(i + n, min(L, i + n + window)):
                    if slots[j] >= 0:
                        centers.append(vidx)
                        contexts.append(slots[j])
    return (
        np.asarray(centers, dtype=np.int64),
        np.asarray(contexts, dtype=np.int64),
        seen,
    )


def _scatter_add(target: np.ndarray, idx: np.ndarray, upd: np.ndarray) -> None:
    # unbuffered scatter-add; deterministic accumulation order
    np.add.at(target, idx, upd.astype(target.dtype))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -30.0, 30.0)))


def train_sgns(
    corpus: Iterable[Sentence | Sequence[str]], vocab: PhraseVocab, cfg: SgnsConfig
) -> EmbeddingMatrix:
    """Skip-gram negative sampling over phrase centers and unigram contexts."""
    corpus = list(corpus)
    centers, contexts, seen = _enumerate_pairs(corpus, vocab, cfg.window)
    if not seen.all():
        missing = int((~seen).sum())
        log.warning(
            "%d vocabulary entries never occurred as centers; they keep their random initialization",
            missing,
        )

    uni = vocab.unigram_entries()
    freqs = np.array([e.frequency for e in uni], dtype=np.float64)
    neg_weights = freqs**0.75
    neg_cum = np.cumsum(neg_weights / neg_weights.sum())

    rng = np.random.default_rng(cfg.seed)
    v_all, v_uni, dim = len(vocab), len(uni), cfg.dim
    center_vecs = ((rng.random((v_all, dim)) - 0.5) / dim).astype(np.float32)
    context_vecs = np.zeros((v_uni, dim), dtype=np.float32)

    n_pairs = len(centers)
    if n_pairs == 0:
        log.warning("no training pairs; returning random initialization")
        return EmbeddingMatrix(center_vecs, "raw", [" ".join(p) for p in vocab.phrases()])

    total = n_pairs * cfg.epochs
    processed = 0
    k = cfg.negatives
    for epoch in range(cfg.epochs):
        for start in range(0, n_pairs, cfg.batch_size):
            c = centers[start : start + cfg.batch_size]
            x = contexts[start : start + cfg.batch_size]
            b = len(c)
            lr = max(cfg.min_learning_rate, cfg.learning_rate * (1.0 - processed / total))
            negs = np.searchsorted(neg_cum, rng.random((b, k)))
            h = center_vecs[c]
            u_pos = context_vecs[x]
            g_pos = (_sigmoid(np.einsum("bd,bd->b", h, u_pos)) - 1.0) * lr
            u_neg = context_vecs[negs]
            g_neg = _sigmoid(np.einsum("bd,bkd->bk", h, u_neg)) * lr
            g_neg[negs == x[:, None]] = 0.0  # drawn negative equals the positive target

            dc = g_pos[:, None] * u_pos + np.einsum("bk,bkd->bd", g_neg, u_neg)
            _scatter_add(center_vecs, c, -dc)
            _scatter_add(context_vecs, x, -(g_pos[:, None] * h))
            _scatter_add(
                context_vecs,
                negs.ravel(),
                -(g_neg[:, :, None] * h[:, None, :]).reshape(-1, dim),
            )
            processed += b
        if not np.isfinite(center_vecs).all():
            raise FloatingPointError("non-finite center vectors after epoch %d" % (epoch + 1))
    return EmbeddingMatrix(center_vecs, "raw", [" ".join(p) for p in vocab.phrases()])


def _unit_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    norms[norms == 0] = 1e-12
    return m / norms


def nearest_neighbors(query_index: int, m: EmbeddingMatrix, k: int) -> list[tuple[int, float]]:
    """Top-k rows by cosine to the query row, query excluded.

    Descending cosine, exact ties broken by ascending index. Asking for more
    neighbors than exist returns everything but the query.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rows = _unit_rows(np.asarray(m.rows, dtype=np.float64))
    scores = rows @ rows[query_index]
    scores[query_index] = -np.inf
    k = min(k, len(scores) - 1)
    if k <= 0:
        return []
    # include every index tied with the k-th score, then settle ties by index
    kth = np.partition(scores, len(scores) - k)[len(scores) - k]
    cand = np.nonzero(scores >= kth)[0]
    cand = cand[np.lexsort((cand, -scores[cand]))][:k]
    return [(int(i), float(scores[i])) for i in cand]


def topk_cosine(queries: np.ndarray, targets: np.ndarray, k: int, chunk: int = 1024):
    """Batched top-k cosine retrieval: returns (indices, scores) arrays.

    Ties resolve toward the smaller target index, matching
    ``nearest_neighbors``. Queries and targets may be the same matrix; no
    self-exclusion is applied here.
    """
    qn = _unit_rows(np.asarray(queries, dtype=np.float64))
    tn = _unit_rows(np.asarray(targets, dtype=np.float64))
    n_t = tn.shape[0]
    k = min(k, n_t)
    out_idx = np.empty((qn.shape[0], k), dtype=np.int64)
    out_sc = np.empty((qn.shape[0], k), dtype=np.float64)
    for start in range(0, qn.shape[0], chunk):
        block = qn[start : start + chunk] @ tn.T
        if k < n_t:
            part = np.argpartition(-block, k - 1, axis=1)[:, :k]
            part_scores = np.take_along_axis(block, part, axis=1)
            # rows where exact ties straddle the k boundary need a full sort,
            # otherwise argpartition could drop the smaller-index candidate
            kth = part_scores.min(axis=1)
            crossing = (block == kth[:, None]).sum(axis=1) > (
                part_scores == kth[:, None]
            ).sum(axis=1)
        else:
            part = np.tile(np.arange(n_t), (block.shape[0], 1))
            part_scores = np.take_along_axis(block, part, axis=1)
            crossing = np.zeros(block.shape[0], dtype=bool)
        order = np.lexsort((part, -part_scores), axis=1)
        top = np.take_along_axis(part, order, axis=1)
        for r in np.nonzero(crossing)[0]:
            full = np.lexsort((np.arange(n_t), -block[r]))[:k]
            top[r] = full
        out_idx[start : start + chunk] = top
        out_sc[start : start + chunk] = np.take_along_axis(
            block, top, axis=1
        )
    return out_idx, out_sc


def write_word2vec(m: EmbeddingMatrix, path: str | Path) -> None:
    """word2vec text format; tokens inside a phrase join with underscores."""
    if m.labels is None or len(m.labels) != len(m):
        raise ValueError("embedding matrix has no phrase labels to persist")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("%d %d\n" % (len(m), m.dim))
        for label, row in zip(m.labels, m.rows):
            fh.write(label.replace(" ", "_"))
            for v in row:
                fh.write(" " + repr(float(v)))
            fh.write("\n")


def read_word2vec(path: str | Path) -> EmbeddingMatrix:
    with open(path, encoding="utf-8") as fh:
        count, dim = (int(x) for x in fh.readline().split())
        rows = np.empty((count, dim), dtype=np.float64)
        labels = []
        for i in range(count):
            parts = fh.readline().rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise ValueError("line %d: expected %d values" % (i + 2, dim))
            labels.append(parts[0].replace("_", " "))
            rows[i] = [float(x) for x in parts[1:]]
    return EmbeddingMatrix(rows, "raw", labels)
