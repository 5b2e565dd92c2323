"""Shared corpus containers: sentences, parallel bitext, and their file formats.

Plain-text corpora are UTF-8, one sentence per line. Bitext lives either in a
single file with " ||| " separating the two sides, or in two parallel files.
"""

from __future__ import annotations

import gzip
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

SEP = " ||| "


def _open(path: str | Path, mode: str = "rt"):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode, encoding="utf-8" if "t" in mode else None)
    return open(path, mode, encoding="utf-8")


@dataclass(frozen=True)
class Sentence:
    """A tokenized sentence plus its 0-based line position in the source file."""

    tokens: tuple[str, ...]
    line_index: int = 0

    def __post_init__(self):
        for tok in self.tokens:
            if not tok:
                raise ValueError("empty token in sentence %d" % self.line_index)
            if any(ch.isspace() for ch in tok):
                raise ValueError(
                    "token %r in sentence %d contains whitespace" % (tok, self.line_index)
                )

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def text(self) -> str:
        return " ".join(self.tokens)

    def replaced(self, tokens: Sequence[str]) -> "Sentence":
        return Sentence(tuple(tokens), self.line_index)


def sentence(text: str, line_index: int = 0) -> Sentence:
    """Whitespace-split shortcut, mostly for tests and fixtures."""
    return Sentence(tuple(text.split()), line_index)


Corpus = list[Sentence]


def read_corpus(path: str | Path) -> Corpus:
    with _open(path) as fh:
        return [Sentence(tuple(line.split()), i) for i, line in enumerate(fh)]


def write_corpus(corpus: Iterable[Sentence], path: str | Path) -> None:
    with _open(path, "wt") as fh:
        for sent in corpus:
            fh.write(sent.text())
            fh.write("\n")


@dataclass
class Bitext:
    """Line-aligned sentence pairs, optionally carrying per-pair token alignments."""

    src: list[Sentence]
    tgt: list[Sentence]
    alignments: list["object"] | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.src) != len(self.tgt):
            raise ValueError(
                "misaligned bitext: %d source vs %d target lines" % (len(self.src), len(self.tgt))
            )
        if self.alignments is not None and len(self.alignments) != len(self.src):
            raise ValueError("alignment count does not match bitext length")

    def __len__(self) -> int:
        return len(self.src)

    def pairs(self) -> Iterator[tuple[Sentence, Sentence]]:
        return zip(self.src, self.tgt)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Sequence[str], Sequence[str]]]) -> "Bitext":
        src, tgt = [], []
        for i, (s, t) in enumerate(pairs):
            src.append(Sentence(tuple(s), i))
            tgt.append(Sentence(tuple(t), i))
        return cls(src, tgt)


def read_bitext(path: str | Path) -> Bitext:
    """Read "src ||| tgt" lines."""
    src, tgt = [], []
    with _open(path) as fh:
        for i, line in enumerate(fh):
            line = line.rstrip("\n")
            if SEP not in line:
                raise ValueError("line %d: missing '%s' separator" % (i + 1, SEP.strip()))
            left, right = line.split(SEP, 1)
            src.append(Sentence(tuple(left.split()), i))
            tgt.append(Sentence(tuple(right.split()), i))
    return Bitext(src, tgt)


def read_bitext_files(src_path: str | Path, tgt_path: str | Path) -> Bitext:
    src = read_corpus(src_path)
    tgt = read_corpus(tgt_path)
    return Bitext(src, tgt)


def write_bitext(bitext: Bitext, path: str | Path) -> None:
    with _open(path, "wt") as fh:
        for s, t in bitext.pairs():
            fh.write(s.text() + SEP + t.text() + "\n")
