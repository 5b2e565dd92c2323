"""Synthetic word-substitution-cipher language pairs.

The standard desk-scale fixture: two "languages" with disjoint vocabularies
related by a fixed bijective word mapping. Both monolingual corpora are
independent samples from the same seeded Markov process, so their phrase
distributions are comparable but the corpora are not parallel; small
parallel dev/test sets come straight from the cipher. A known mapping makes
decipherment accuracy an exact oracle for end-to-end translation quality.
"""

from __future__ import annotations

import bisect
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import Bitext, Corpus, Sentence, write_bitext, write_corpus


@dataclass
class CipherFixture:
    mono_a: Corpus
    mono_b: Corpus
    dev: Bitext  # src = language A, tgt = language B
    test: Bitext
    mapping: dict[str, str]  # A word -> B word

    def dev_for(self, direction: str) -> Bitext:
        """dev set oriented for an "a2b" or "b2a" system."""
        return self.dev if direction == "a2b" else Bitext(self.dev.tgt, self.dev.src)

    def test_for(self, direction: str) -> Bitext:
        return self.test if direction == "a2b" else Bitext(self.test.tgt, self.test.src)

    def gold_for(self, direction: str) -> dict[str, str]:
        if direction == "a2b":
            return dict(self.mapping)
        return {b: a for a, b in self.mapping.items()}


class _MarkovSampler:
    """Zipf-weighted Markov chain over word indices with sparse local structure.

    The steep Zipf exponent keeps frequency ranks stable across independent
    samples (a usable fully-unsupervised mapping seed) and the high local
    mass gives words distinctive context signatures, so skip-gram spaces of
    two samples are near-isomorphic.
    """

    def __init__(self, vocab_size: int, seed: int, zipf_s: float = 1.5, local_mass: float = 0.7):
        rng = random.Random(seed)
        base = [1.0 / (i + 1) ** zipf_s for i in range(vocab_size)]
        total = sum(base)
        self.base_cum = []
        acc = 0.0
        for w in base:
            acc += w / total
            self.base_cum.append(acc)
        self.local_mass = local_mass
        self.successors = []
        weights = [0.4, 0.3, 0.2, 0.1]
        for i in range(vocab_size):
            succ = rng.sample(range(vocab_size), 4)
            self.successors.append(list(zip(succ, weights)))

    def _sample_base(self, rng: random.Random) -> int:
        return bisect.bisect_left(self.base_cum, rng.random())

    def next_word(self, prev: int | None, rng: random.Random) -> int:
        if prev is not None and rng.random() < self.local_mass:
            r = rng.random()
            acc = 0.0
            for idx, w in self.successors[prev]:
                acc += w
                if r < acc:
                    return idx
        return self._sample_base(rng)

    def sentence(self, rng: random.Random, lo: int = 4, hi: int = 10) -> list[int]:
        length = rng.randint(lo, hi)
        out: list[int] = []
        prev = None
        for _ in range(length):
            prev = self.next_word(prev, rng)
            out.append(prev)
        return out


def generate_cipher_pair(
    n_sentences: int = 20_000,
    vocab_size: int = 200,
    seed: int = 0,
    dev_size: int = 400,
    test_size: int = 400,
    reorder_noise: float = 0.0,
) -> CipherFixture:
    """Deterministic fixture; same arguments always produce the same corpora."""
    sampler = _MarkovSampler(vocab_size, seed)
    rng = random.Random(seed + 1)

    a_vocab = ["za%03d" % i for i in range(vocab_size)]
    perm = list(range(vocab_size))
    random.Random(seed + 2).shuffle(perm)
    b_vocab = ["qb%03d" % perm[i] for i in range(vocab_size)]
    mapping = dict(zip(a_vocab, b_vocab))

    def noise(words: list[int]) -> list[int]:
        if reorder_noise and len(words) > 2 and rng.random() < reorder_noise:
            k = rng.randrange(len(words) - 1)
            words = words[:]
            words[k], words[k + 1] = words[k + 1], words[k]
        return words

    mono_a = [
        Sentence(tuple(a_vocab[w] for w in sampler.sentence(rng)), i) for i in range(n_sentences)
    ]
    mono_b = [
        Sentence(tuple(b_vocab[w] for w in noise(sampler.sentence(rng))), i)
        for i in range(n_sentences)
    ]

    def parallel(n: int, base: int) -> Bitext:
        src, tgt = [], []
        for i in range(n):
            words = sampler.sentence(rng)
            src.append(Sentence(tuple(a_vocab[w] for w in words), base + i))
            tgt.append(Sentence(tuple(b_vocab[w] for w in words), base + i))
        return Bitext(src, tgt)

    dev = parallel(dev_size, 0)
    test = parallel(test_size, dev_size)
    return CipherFixture(mono_a, mono_b, dev, test, mapping)


def write_fixture(fixture: CipherFixture, out_dir: str | Path) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "mono_a": out_dir / "mono.a.txt",
        "mono_b": out_dir / "mono.b.txt",
        "dev": out_dir / "dev.a-b.txt",
        "test": out_dir / "test.a-b.txt",
        "mapping": out_dir / "cipher_map.tsv",
    }
    write_corpus(fixture.mono_a, paths["mono_a"])
    write_corpus(fixture.mono_b, paths["mono_b"])
    write_bitext(fixture.dev, paths["dev"])
    write_bitext(fixture.test, paths["test"])
    with open(paths["mapping"], "w", encoding="utf-8") as fh:
        for a, b in sorted(fixture.mapping.items()):
            fh.write("%s\t%s\n" % (a, b))
    return paths


def token_accuracy(hyps: Sequence[Sequence[str]], golds: Sequence[Sequence[str]]) -> float:
    """Position-wise token match rate against gold, over gold token count."""
    total = 0
    hits = 0
    for hyp, gold in zip(hyps, golds):
        total += len(gold)
        hits += sum(1 for h, g in zip(hyp, gold) if h == g)
    return hits / total if total else 0.0
