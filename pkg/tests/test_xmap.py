import math

import numpy as np
import pytest

from umtx.phrasevec import EmbeddingMatrix, build_phrase_vocab
from umtx.xmap import (
    MappingSolution,
    SeedDictionary,
    dictionary_precision,
    induce_dictionary,
    normalize_embeddings,
    seed_frequency,
    seed_identical,
    seed_numerals,
    self_learning_map,
    solve_procrustes,
)


def random_orthogonal(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)))
    return q * np.sign(np.diag(r))


def normalized_gaussian(rng, n, d):
    m = EmbeddingMatrix(rng.normal(size=(n, d)))
    return normalize_embeddings(m).rows


class TestNormalize:
    def test_unit_rows(self):
        rng = np.random.default_rng(3)
        out = normalize_embeddings(EmbeddingMatrix(rng.normal(size=(20, 5))))
        assert np.allclose(np.linalg.norm(out.rows, axis=1), 1.0, atol=1e-9)
        assert out.norm_state == "centered+unit"

    def test_two_row_hand_computation(self):
        # rows (2,0),(0,3) -> unit (1,0),(0,1) -> centered (.5,-.5),(-.5,.5)
        # -> unit rows (sqrt2/2)(1,-1) and (sqrt2/2)(-1,1); columns mean 0
        out = normalize_embeddings(EmbeddingMatrix(np.array([[2.0, 0.0], [0.0, 3.0]])))
        s = math.sqrt(2) / 2
        assert np.allclose(out.rows, [[s, -s], [-s, s]], atol=1e-12)
        assert np.allclose(out.rows.mean(axis=0), 0.0, atol=1e-12)

    def test_idempotent(self):
        rng = np.random.default_rng(4)
        once = normalize_embeddings(EmbeddingMatrix(rng.normal(size=(15, 6))))
        twice = normalize_embeddings(once)
        assert np.allclose(once.rows, twice.rows, atol=1e-9)

    def test_zero_row_names_entry(self):
        m = EmbeddingMatrix(np.array([[1.0, 0.0], [0.0, 0.0]]), labels=["good", "bad"])
        with pytest.raises(ValueError, match="bad"):
            normalize_embeddings(m)


class TestProcrustes:
    def test_identity_when_spaces_equal(self):
        rng = np.random.default_rng(5)
        x = normalized_gaussian(rng, 40, 8)
        seed = SeedDictionary([(i, i) for i in range(40)])
        wx, wz = solve_procrustes(x, x, seed)
        assert np.allclose(wx, np.eye(8), atol=1e-9)
        assert np.allclose(wz, np.eye(8))

    def test_recovers_random_rotation(self):
        rng = np.random.default_rng(6)
        x = normalized_gaussian(rng, 200, 16)
        r = random_orthogonal(rng, 16)
        z = x @ r
        wx, _ = solve_procrustes(x, z, SeedDictionary([(i, i) for i in range(200)]))
        assert np.linalg.norm(wx - r) < 1e-6

    def test_single_pair_2d_reaches_cosine_one(self):
        x = np.array([[1.0, 0.0], [0.0, 1.0]])
        z = np.array([[math.sqrt(0.5), math.sqrt(0.5)], [0.0, 1.0]])
        wx, _ = solve_procrustes(x, z, SeedDictionary([(0, 0)]))
        mapped = x @ wx
        cos = mapped[0] @ z[0] / (np.linalg.norm(mapped[0]) * np.linalg.norm(z[0]))
        assert cos == pytest.approx(1.0, abs=1e-12)

    def test_orthogonality(self):
        rng = np.random.default_rng(7)
        x = normalized_gaussian(rng, 50, 10)
        z = normalized_gaussian(rng, 50, 10)
        wx, wz = solve_procrustes(x, z, SeedDictionary([(i, i) for i in range(30)]))
        assert np.abs(wx.T @ wx - np.eye(10)).max() < 1e-6
        assert np.abs(wz.T @ wz - np.eye(10)).max() < 1e-6

    def test_rank_deficient_dictionary_still_orthogonal(self):
        rng = np.random.default_rng(8)
        x = normalized_gaussian(rng, 30, 8)
        z = normalized_gaussian(rng, 30, 8)
        wx, _ = solve_procrustes(x, z, SeedDictionary([(0, 0), (1, 1)]))
        assert np.abs(wx.T @ wx - np.eye(8)).max() < 1e-6

    def test_empty_dictionary_rejected(self):
        with pytest.raises(ValueError):
            solve_procrustes(np.eye(2), np.eye(2), SeedDictionary([]))


def brute_csls(xm, zm, k):
    xn = xm / np.linalg.norm(xm, axis=1, keepdims=True)
    zn = zm / np.linalg.norm(zm, axis=1, keepdims=True)
    sim = xn @ zn.T
    r_src = np.array([np.sort(sim[i])[-k:].mean() for i in range(len(xn))])
    r_tgt = np.array([np.sort(sim[:, j])[-k:].mean() for j in range(len(zn))])
    best = []
    for i in range(len(xn)):
        scores = 2 * sim[i] - r_src[i] - r_tgt
        best.append(int(np.argmax(scores)))
    return best


class TestInduceDictionary:
    def test_identity_under_nn(self):
        rng = np.random.default_rng(9)
        x = normalized_gaussian(rng, 25, 6)
        d = induce_dictionary(x, x, "nn")
        assert d.pairs == [(i, i) for i in range(25)]

    def test_nn_equals_brute_force_argmax(self):
        rng = np.random.default_rng(10)
        x = normalized_gaussian(rng, 30, 8)
        z = normalized_gaussian(rng, 35, 8)
        d = induce_dictionary(x, z, "nn", chunk=7)
        sim = x @ z.T
        assert [t for _, t in d.pairs] == [int(np.argmax(sim[i])) for i in range(30)]

    @pytest.mark.parametrize("k", [1, 3, 10])
    def test_csls_equals_brute_force(self, k):
        rng = np.random.default_rng(11)
        x = normalized_gaussian(rng, 30, 8)
        z = normalized_gaussian(rng, 30, 8)
        d = induce_dictionary(x, z, "csls", csls_k=k, chunk=11)
        assert [t for _, t in d.pairs] == brute_csls(x, z, k)

    def test_csls_with_k_equal_vocab_matches_oracle(self):
        rng = np.random.default_rng(12)
        x = normalized_gaussian(rng, 30, 8)
        z = normalized_gaussian(rng, 30, 8)
        d = induce_dictionary(x, z, "csls", csls_k=30)
        assert [t for _, t in d.pairs] == brute_csls(x, z, 30)

    def test_many_to_one_permitted(self):
        x = np.array([[1.0, 0.0], [0.9, 0.1]])
        z = np.array([[1.0, 0.0], [-1.0, 0.0]])
        d = induce_dictionary(x, z, "nn")
        assert [t for _, t in d.pairs] == [0, 0]

    def test_csls_k_below_one_rejected(self):
        with pytest.raises(ValueError):
            induce_dictionary(np.eye(2), np.eye(2), "csls", csls_k=0)


class TestSelfLearning:
    def _setup(self, rng, n=800, d=16, noise=0.0):
        x = normalized_gaussian(rng, n, d)
        r = random_orthogonal(rng, d)
        z = x @ r
        if noise:
            z = normalize_embeddings(
                EmbeddingMatrix(z + rng.normal(scale=noise, size=z.shape))
            ).rows
        return x, z, r

    def test_noiseless_recovery(self):
        rng = np.random.default_rng(13)
        x, z, r = self._setup(rng)
        sol = self_learning_map(x, z, SeedDictionary([(i, i) for i in range(25)]))
        gold = {i: i for i in range(len(x))}
        assert dictionary_precision(sol.final_dictionary, gold) >= 0.99

    def test_noisy_recovery(self):
        rng = np.random.default_rng(14)
        x, z, r = self._setup(rng, noise=0.01)
        sol = self_learning_map(x, z, SeedDictionary([(i, i) for i in range(25)]))
        gold = {i: i for i in range(len(x))}
        assert dictionary_precision(sol.final_dictionary, gold) >= 0.80

    def test_zero_iters_returns_seed_solution(self):
        rng = np.random.default_rng(15)
        x, z, _ = self._setup(rng, n=60, d=6)
        seed = SeedDictionary([(i, i) for i in range(10)])
        sol = self_learning_map(x, z, seed, max_iters=0)
        wx, _ = solve_procrustes(x, z, seed)
        assert np.allclose(sol.wx, wx)
        assert sol.final_dictionary == seed.pairs
        assert sol.objective_trace == []

    def test_trace_non_decreasing_and_orthogonal(self):
        rng = np.random.default_rng(16)
        x, z, _ = self._setup(rng, n=300, d=10, noise=0.05)
        sol = self_learning_map(x, z, SeedDictionary([(i, i) for i in range(15)]))
        trace = sol.objective_trace
        assert all(b - a >= -1e-9 for a, b in zip(trace, trace[1:]))
        assert np.abs(sol.wx.T @ sol.wx - np.eye(10)).max() < 1e-6
        assert np.abs(sol.wz.T @ sol.wz - np.eye(10)).max() < 1e-6

    def test_target_rotation_invariance(self):
        rng = np.random.default_rng(17)
        x, z, _ = self._setup(rng, n=200, d=8)
        q = random_orthogonal(rng, 8)
        seed = SeedDictionary([(i, i) for i in range(20)])
        sol = self_learning_map(x, z, seed, max_iters=5)
        sol_q = self_learning_map(x, z @ q, seed, max_iters=5)
        assert sol_q.final_dictionary == sol.final_dictionary
        # the extra rotation is exactly absorbable: Wx' = Wx @ Q
        assert np.linalg.norm(sol_q.wx - sol.wx @ q) < 1e-8


class TestSeeds:
    def _vocabs(self):
        src = build_phrase_vocab([["the", "house", "42", "x1"]] * 3 + [["the", "the"]], (10, 10, 10))
        tgt = build_phrase_vocab([["das", "haus", "42", "x1"]] * 2 + [["das"]], (10, 10, 10))
        return src, tgt

    def test_identical(self):
        src, tgt = self._vocabs()
        seed = seed_identical(src, tgt)
        assert seed.provenance == "identical-tokens"
        spairs = {
            (src.entries[s].phrase, tgt.entries[t].phrase) for s, t in seed.pairs
        }
        assert (("42",), ("42",)) in spairs
        assert (("x1",), ("x1",)) in spairs

    def test_numerals(self):
        src, tgt = self._vocabs()
        seed = seed_numerals(src, tgt)
        got = {(src.entries[s].phrase[0], tgt.entries[t].phrase[0]) for s, t in seed.pairs}
        assert got == {("42", "42")}

    def test_numerals_missing_raises(self):
        src = build_phrase_vocab([["a"]], (5, 5, 5))
        tgt = build_phrase_vocab([["b"]], (5, 5, 5))
        with pytest.raises(ValueError):
            seed_numerals(src, tgt)

    def test_frequency_pairs_by_rank(self):
        src = build_phrase_vocab([["a", "a", "b"]], (5, 5, 5))
        tgt = build_phrase_vocab([["y", "x", "x"]], (5, 5, 5))
        seed = seed_frequency(src, tgt, 2)
        pairs = [
            (src.entries[s].phrase[0], tgt.entries[t].phrase[0]) for s, t in seed.pairs
        ]
        assert pairs == [("a", "x"), ("b", "y")]
