"""Corpus preprocessing: tokenization, truecasing, length and language filtering.

The tokenizer is deliberately simple (whitespace split plus punctuation
peeling) so it behaves identically across languages and round-trips through
its own output. The truecaser follows the usual convention of judging a
word's casing away from sentence-initial position. Language identity is a
character n-gram Naive Bayes classifier trained from user-supplied seed
corpora.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .corpus import Corpus, Sentence

MODEL_VERSION = "umtx-model-v1"


def _is_word_char(ch: str) -> bool:
    return ch.isalnum()


def tokenize(raw_line: str, line_index: int = 0) -> Sentence:
    """Split a raw line into tokens.

    Splits on Unicode whitespace, then peels leading and trailing
    punctuation off each chunk one character at a time. Internal
    punctuation (hyphens, apostrophes) stays attached, so the output
    re-tokenizes to itself.
    """
    tokens: list[str] = []
    for chunk in raw_line.split():
        start, end = 0, len(chunk)
        while start < end and not _is_word_char(chunk[start]):
            start += 1
        while end > start and not _is_word_char(chunk[end - 1]):
            end -= 1
        tokens.extend(chunk[:start])
        if start < end:
            tokens.append(chunk[start:end])
        tokens.extend(chunk[end:])
    return Sentence(tuple(tokens), line_index)


def tokenize_corpus(lines: Iterable[str]) -> Iterator[Sentence]:
    for i, line in enumerate(lines):
        yield tokenize(line, i)


@dataclass
class TruecaseModel:
    """Best observed casing per lowercased surface form, with its count."""

    best: dict[str, tuple[str, int]] = field(default_factory=dict)

    def casing_for(self, word: str) -> str | None:
        hit = self.best.get(word.lower())
        return hit[0] if hit else None

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("#%s truecase\n" % MODEL_VERSION)
            for low in sorted(self.best):
                form, count = self.best[low]
                fh.write("%s\t%s\t%d\n" % (low, form, count))

    @classmethod
    def load(cls, path: str | Path) -> "TruecaseModel":
        best: dict[str, tuple[str, int]] = {}
        with open(path, encoding="utf-8") as fh:
            header = fh.readline()
            if MODEL_VERSION not in header:
                raise ValueError("unrecognized truecase model header: %r" % header.strip())
            for line in fh:
                low, form, count = line.rstrip("\n").split("\t")
                best[low] = (form, int(count))
        return cls(best)


def _pick_casing(counts: Counter) -> tuple[str, int]:
    # ties go to the lowercase form, then lexicographic for determinism
    def key(form: str):
        return (-counts[form], form != form.lower(), form)

    form = min(counts, key=key)
    return form, counts[form]


def train_truecaser(corpus: Iterable[Sentence]) -> TruecaseModel:
    """Count casings of non-initial tokens; majority form wins per word.

    Words seen only sentence-initially fall back to counts of their initial
    occurrences (the only evidence available).
    """
    mid: dict[str, Counter] = defaultdict(Counter)
    initial: dict[str, Counter] = defaultdict(Counter)
    empty = True
    for sent in corpus:
        empty = False
        for pos, tok in enumerate(sent.tokens):
            target = initial if pos == 0 else mid
            target[tok.lower()][tok] += 1
    if empty:
        raise ValueError("cannot train a truecaser on an empty corpus")
    best: dict[str, tuple[str, int]] = {}
    for low, counts in mid.items():
        best[low] = _pick_casing(counts)
    for low, counts in initial.items():
        if low not in best:
            best[low] = _pick_casing(counts)
    return TruecaseModel(best)


def apply_truecase(sent: Sentence, model: TruecaseModel) -> Sentence:
    """Re-case the sentence-initial token; everything else is untouched."""
    if not sent.tokens:
        return sent
    form = model.casing_for(sent.tokens[0])
    if form is None or form == sent.tokens[0]:
        return sent
    return sent.replaced((form,) + sent.tokens[1:])


def filter_by_length(sent: Sentence, min_tokens: int = 3, max_tokens: int = 80) -> bool:
    """True iff the sentence should be kept."""
    return min_tokens <= len(sent.tokens) <= max_tokens


@dataclass
class LangIdModel:
    """Character n-gram Naive Bayes language classifier.

    ``logprob[label][gram]`` holds add-one-smoothed log probabilities over
    the global gram inventory; unseen grams score ``oov_logprob[label]``.
    """

    order: int
    labels: list[str]
    log_prior: dict[str, float]
    logprob: dict[str, dict[str, float]]
    oov_logprob: dict[str, float]

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("#%s langid order=%d\n" % (MODEL_VERSION, self.order))
            for label in self.labels:
                fh.write("%s\t<prior>\t%r\n" % (label, self.log_prior[label]))
                fh.write("%s\t<oov>\t%r\n" % (label, self.oov_logprob[label]))
                for gram in sorted(self.logprob[label]):
                    fh.write("%s\t%s\t%r\n" % (label, gram.replace(" ", "\\s"), self.logprob[label][gram]))

    @classmethod
    def load(cls, path: str | Path) -> "LangIdModel":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline()
            if MODEL_VERSION not in header:
                raise ValueError("unrecognized langid model header: %r" % header.strip())
            order = int(header.rsplit("order=", 1)[1])
            labels: list[str] = []
            log_prior: dict[str, float] = {}
            logprob: dict[str, dict[str, float]] = {}
            oov: dict[str, float] = {}
            for line in fh:
                label, gram, value = line.rstrip("\n").split("\t")
                if label not in logprob:
                    labels.append(label)
                    logprob[label] = {}
                if gram == "<prior>":
                    log_prior[label] = float(value)
                elif gram == "<oov>":
                    oov[label] = float(value)
                else:
                    logprob[label][gram.replace("\\s", " ")] = float(value)
        return cls(order, labels, log_prior, logprob, oov)


def _char_ngrams(sent: Sentence, order: int) -> list[str]:
    text = sent.text()
    if len(text) < order:
        return [text] if text else []
    return [text[i : i + order] for i in range(len(text) - order + 1)]


def train_langid(labeled_corpora: dict[str, Iterable[Sentence]], ngram_order: int = 3) -> LangIdModel:
    """Multinomial Naive Bayes over character n-grams, add-one smoothing."""
    if len(labeled_corpora) < 2:
        raise ValueError("language ID training needs at least 2 labels")
    labels = list(labeled_corpora)
    gram_counts: dict[str, Counter] = {}
    sent_counts: dict[str, int] = {}
    inventory: set[str] = set()
    for label, corpus in labeled_corpora.items():
        counts: Counter = Counter()
        n_sents = 0
        for sent in corpus:
            n_sents += 1
            counts.update(_char_ngrams(sent, ngram_order))
        if n_sents == 0:
            raise ValueError("label %r has no training sentences" % label)
        gram_counts[label] = counts
        sent_counts[label] = n_sents
        inventory.update(counts)

    total_sents = sum(sent_counts.values())
    log_prior = {lb: math.log(sent_counts[lb] / total_sents) for lb in labels}
    logprob: dict[str, dict[str, float]] = {}
    oov: dict[str, float] = {}
    # event space: every gram seen under any label, plus one shared OOV bucket
    denom_extra = len(inventory) + 1
    for label in labels:
        total = sum(gram_counts[label].values())
        denom = total + denom_extra
        logprob[label] = {g: math.log((gram_counts[label][g] + 1) / denom) for g in inventory}
        oov[label] = math.log(1 / denom)
    return LangIdModel(ngram_order, labels, log_prior, logprob, oov)


def classify_language(sent: Sentence, model: LangIdModel) -> tuple[str, float]:
    """Argmax label and the log-posterior margin over the runner-up.

    An empty sentence is scored on priors alone; prior ties resolve in label
    order.
    """
    grams = _char_ngrams(sent, model.order)
    scored = []
    for pos, label in enumerate(model.labels):
        table = model.logprob[label]
        oov = model.oov_logprob[label]
        score = model.log_prior[label]
        for g in grams:
            score += table.get(g, oov)
        scored.append((-score, pos, label))
    scored.sort()
    best, second = scored[0], scored[1]
    return best[2], (-best[0]) - (-second[0])


def filter_corpus_language(corpus: Corpus, model: LangIdModel, keep_label: str) -> Corpus:
    """Order-preserving filter keeping sentences classified as ``keep_label``."""
    return [s for s in corpus if classify_language(s, model)[0] == keep_label]
