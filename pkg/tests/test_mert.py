import math
import random

import numpy as np
import pytest

from umtx.corpus import Bitext
from umtx.decoder import FeatureWeights
from umtx.mert import (
    PoolEntry,
    _pool_bleu,
    line_search,
    mert_tune,
    optimize_weights_on_pool,
)
from umtx.mteval import sentence_stats
from umtx.ngram_lm import count_ngrams, estimate_kn
from umtx.ptable import Candidate, PhraseTable


def entry(hyp, ref, features):
    return PoolEntry(np.asarray(features, dtype=float), sentence_stats(list(hyp), list(ref)))


class TestLineSearch:
    def test_finds_crossing(self):
        # h1 matches the reference and wins for gamma above the crossing
        pool = [[entry("r", "r", [1.0, 0.0]), entry("x", "r", [0.0, 2.0])]]
        gamma, bleu = line_search(pool, np.array([0.1, 1.0]), np.array([1.0, 0.0]))
        assert bleu == pytest.approx(100.0)
        # crossing at 0.1 + g = 2.0 -> g = 1.9; any step beyond works
        assert gamma > 1.9

    def test_matches_grid_scan(self):
        rng = random.Random(5)
        nrng = np.random.default_rng(5)
        vocab = ["a", "b", "c", "d"]
        for _ in range(15):
            pool = []
            for _ in range(4):
                ref = [rng.choice(vocab) for _ in range(4)]
                entries = []
                for _ in range(rng.randrange(2, 5)):
                    hyp = [rng.choice(vocab) for _ in range(rng.randrange(2, 6))]
                    entries.append(entry(hyp, ref, nrng.normal(size=3)))
                pool.append(entries)
            w = np.array([0.5, -0.2, 0.1])
            d = np.asarray(random.Random(1).choices([1.0, -1.0, 0.5], k=3))
            gamma, bleu = line_search(pool, w, d)
            assert _pool_bleu(pool, w + gamma * d) == pytest.approx(bleu, abs=1e-9)
            grid_best = max(
                _pool_bleu(pool, w + g * d) for g in np.linspace(-20, 20, 2001)
            )
            assert bleu >= grid_best - 1e-9


class TestOptimizeOnPool:
    def test_two_feature_toy_recovers_oracle_region(self):
        # the reference-matching hypothesis wins iff w1 > 2*w2
        pool = [[entry("r", "r", [1.0, 0.0]), entry("x", "r", [0.0, 2.0])]]
        # independent grid-search oracle over the weight plane (on the exact
        # boundary w1 == 2*w2 the argmax tie goes to the first pool entry)
        grid = [
            (w1, w2)
            for w1 in np.linspace(-2, 2, 41)
            for w2 in np.linspace(-2, 2, 41)
            if _pool_bleu(pool, np.array([w1, w2])) == pytest.approx(100.0)
        ]
        assert all(w1 >= 2 * w2 - 1e-12 for w1, w2 in grid)
        assert any(w1 > 2 * w2 + 1e-12 for w1, w2 in grid)

        weights, bleu, trace = optimize_weights_on_pool(
            pool, np.array([0.1, 1.0]), random_restarts=4, seed=0
        )
        assert bleu == pytest.approx(100.0)
        assert weights[0] > 2 * weights[1]

    def test_single_hypothesis_pool_returns_initial(self):
        pool = [[entry("a b", "a b", [0.3, -0.1])], [entry("c", "c d", [1.0, 0.2])]]
        init = np.array([0.7, 0.4])
        weights, bleu, trace = optimize_weights_on_pool(pool, init, random_restarts=3, seed=1)
        assert np.array_equal(weights, init)
        assert len(trace) == 1

    def test_trace_non_decreasing(self):
        rng = random.Random(9)
        nrng = np.random.default_rng(9)
        vocab = ["a", "b", "c", "d", "e"]
        pool = []
        for _ in range(6):
            ref = [rng.choice(vocab) for _ in range(5)]
            entries = [
                entry(
                    [rng.choice(vocab) for _ in range(rng.randrange(3, 7))],
                    ref,
                    nrng.normal(size=4),
                )
                for _ in range(6)
            ]
            entries.append(entry(ref, ref, nrng.normal(size=4)))
            pool.append(entries)
        weights, bleu, trace = optimize_weights_on_pool(
            pool, np.zeros(4), random_restarts=8, seed=2
        )
        assert all(b - a >= -1e-12 for a, b in zip(trace, trace[1:]))
        assert bleu == trace[-1]
        assert bleu >= trace[0]


def cipher_system(rng, n_dev=25):
    """Tiny deterministic-cipher dev set plus a noisy phrase table."""
    src_vocab = ["s%d" % i for i in range(8)]
    mapping = {w: "t%d" % i for i, w in enumerate(src_vocab)}
    pairs = []
    for _ in range(n_dev):
        s = [rng.choice(src_vocab) for _ in range(rng.randrange(3, 7))]
        pairs.append((s, [mapping[w] for w in s]))
    dev = Bitext.from_pairs(pairs)
    entries = {}
    for w, t in mapping.items():
        wrong = "t%d" % ((int(t[1:]) + 1) % len(src_vocab))
        entries[(w,)] = [
            Candidate((t,), 0.6, 0.6),
            Candidate((wrong,), 0.4, 0.4),
        ]
    table = PhraseTable(entries, "unsupervised")
    lm = estimate_kn(count_ngrams([t for _, t in pairs], 2))
    return dev, table, lm


class TestMertTune:
    def test_accepted_bleu_monotone_and_final_geq_initial(self):
        rng = random.Random(11)
        dev, table, lm = cipher_system(rng)
        result = mert_tune(
            dev,
            table,
            lm,
            FeatureWeights(),
            rounds=3,
            nbest_n=20,
            random_restarts=5,
            seed=3,
            beam_size=10,
        )
        assert result.accepted_bleus
        assert all(
            b - a >= -1e-9 for a, b in zip(result.accepted_bleus, result.accepted_bleus[1:])
        )

    def test_improves_over_default_weights(self):
        rng = random.Random(13)
        dev, table, lm = cipher_system(rng)
        # sabotage the starting point: negative LM weight decodes badly
        start = FeatureWeights(0.1, 0.1, -0.5, 0.0, 0.0, 0.0)
        result = mert_tune(
            dev, table, lm, start, rounds=3, nbest_n=20, random_restarts=5, seed=4, beam_size=10
        )
        from umtx.decoder import DecodeParams, decode_corpus
        from umtx.mteval import corpus_bleu

        def dev_bleu(w):
            hyps = [e.translation for e in decode_corpus(dev.src, table, lm, w)]
            return corpus_bleu(hyps, [r.tokens for r in dev.tgt]).bleu

        assert dev_bleu(result.weights) >= dev_bleu(start)

    def test_empty_devset_rejected(self):
        with pytest.raises(ValueError):
            mert_tune(
                Bitext([], []),
                PhraseTable({}, "extracted"),
                estimate_kn(count_ngrams([["a"]], 1)),
                FeatureWeights(),
            )

    def test_all_empty_references_rejected(self):
        dev = Bitext.from_pairs([(["a"], [])])
        with pytest.raises(ValueError):
            mert_tune(
                dev,
                PhraseTable({}, "extracted"),
                estimate_kn(count_ngrams([["a"]], 1)),
                FeatureWeights(),
            )
