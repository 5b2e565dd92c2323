"""Synthetic-corpus repair and output post-processing.

Covers four repair families: replacing untranslated source-alphabet words on
the synthetic target side with an unk token, window-shuffle reorder
augmentation, named-entity treatment driven by a per-type policy table with
a Levenshtein trust check, and target-language quotation normalization.
Every replacement is logged as (sentence, span, replacement) so an edit log
replayed against the input reproduces the output exactly.
"""

from __future__ import annotations

import logging
import random
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .aligner import Alignment
from .corpus import Bitext, Corpus, Sentence

log = logging.getLogger(__name__)

NE_TYPES = (
    "address-number",
    "geographical",
    "institution",
    "media",
    "number",
    "artifact",
    "personal",
    "time",
)

PRE_ACTIONS = ("copy", "remove", "ignore")
POST_ACTIONS = ("copy", "ignore")

CZECH_SPECIFIC = "áčďéěíňóřšťúůýž"
GERMAN_SPECIFIC = "äöüß"


@dataclass(frozen=True)
class NESpan:
    sent_index: int
    start: int
    end: int
    ne_type: str
    surface: str

    def __post_init__(self):
        if self.ne_type not in NE_TYPES:
            raise ValueError("unknown NE type %r" % self.ne_type)
        if not 0 <= self.start < self.end:
            raise ValueError("empty or negative NE span [%d, %d)" % (self.start, self.end))


def write_ne_spans(spans: Iterable[NESpan], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in spans:
            fh.write("%d\t%d\t%d\t%s\t%s\n" % (s.sent_index, s.start, s.end, s.ne_type, s.surface))


def read_ne_spans(path: str | Path) -> list[NESpan]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 5:
                raise ValueError("line %d: expected 5 tab-separated fields" % lineno)
            out.append(NESpan(int(parts[0]), int(parts[1]), int(parts[2]), parts[3], parts[4]))
    return out


@dataclass
class NEPolicy:
    """Per-type pre/post treatment actions; must cover all eight types."""

    pre: dict[str, str]
    post: dict[str, str]

    def __post_init__(self):
        for t in NE_TYPES:
            if self.pre.get(t) not in PRE_ACTIONS:
                raise ValueError("missing or invalid pre action for %r" % t)
            if self.post.get(t) not in POST_ACTIONS:
                raise ValueError("missing or invalid post action for %r" % t)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for t in NE_TYPES:
                fh.write("%s\t%s\t%s\n" % (t, self.pre[t], self.post[t]))

    @classmethod
    def load(cls, path: str | Path) -> "NEPolicy":
        pre, post = {}, {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                t, p, q = line.rstrip("\n").split("\t")
                pre[t], post[t] = p, q
        return cls(pre, post)


def default_policy() -> NEPolicy:
    """Copy-dominant policy; geographical mistranslations are removed during
    pre-treatment and only numbers/names are copied back in post-processing."""
    pre = {t: "copy" for t in NE_TYPES}
    pre["geographical"] = "remove"
    post = {
        "address-number": "copy",
        "geographical": "copy",
        "institution": "ignore",
        "media": "ignore",
        "number": "copy",
        "artifact": "ignore",
        "personal": "copy",
        "time": "ignore",
    }
    return NEPolicy(pre, post)


@dataclass
class DiacriticProfile:
    """Characters that betray an untranslated source-language word."""

    chars: frozenset[str]

    def __post_init__(self):
        if not self.chars:
            raise ValueError("diacritic profile must be non-empty")

    @classmethod
    def czech(cls, exclude_target: str = GERMAN_SPECIFIC) -> "DiacriticProfile":
        marks = set(CZECH_SPECIFIC) | set(CZECH_SPECIFIC.upper())
        banned = set(exclude_target) | set(exclude_target.upper())
        if marks & banned:
            raise ValueError("source profile overlaps target-specific characters")
        return cls(frozenset(marks))

    def hits(self, token: str) -> bool:
        return any(ch in self.chars for ch in token)


@dataclass
class Edit:
    """One applied replacement on a token list, in application order."""

    sent_index: int
    start: int
    end: int
    replacement: tuple[str, ...]


def apply_edits(tokens: Sequence[str], edits: Iterable[Edit]) -> list[str]:
    out = list(tokens)
    for e in edits:
        out[e.start : e.end] = list(e.replacement)
    return out


def replay_edits(bitext: Bitext, edits: Sequence[Edit]) -> Bitext:
    """Re-apply a pre-treatment edit log to the target side of a bitext."""
    per_sent: dict[int, list[Edit]] = {}
    for e in edits:
        per_sent.setdefault(e.sent_index, []).append(e)
    tgt = []
    for idx, sent in enumerate(bitext.tgt):
        tgt.append(sent.replaced(apply_edits(sent.tokens, per_sent.get(idx, []))))
    return Bitext(bitext.src, tgt)


@dataclass
class StripResult:
    bitext: Bitext
    replaced: int
    edits: list[Edit] = field(default_factory=list)


def strip_untranslated(bitext: Bitext, profile: DiacriticProfile, unk_token: str = "unk") -> StripResult:
    """Replace target-side tokens carrying profile characters with the unk token."""
    new_tgt = []
    edits: list[Edit] = []
    replaced = 0
    for idx, sent in enumerate(bitext.tgt):
        tokens = list(sent.tokens)
        for pos, tok in enumerate(tokens):
            if profile.hits(tok):
                tokens[pos] = unk_token
                edits.append(Edit(idx, pos, pos + 1, (unk_token,)))
                replaced += 1
        new_tgt.append(sent.replaced(tokens))
    return StripResult(Bitext(bitext.src, new_tgt), replaced, edits)


def reorder_augment(corpus: Corpus, window: int = 5, seed: int = 0) -> Corpus:
    """Two passes over the corpus: first shuffling odd-indexed sentences
    inside consecutive ``window``-token blocks, then even-indexed ones.

    Output holds 2N sentences; each input appears verbatim exactly once.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    rng = random.Random(seed)

    def shuffled(sent: Sentence) -> Sentence:
        tokens = list(sent.tokens)
        for start in range(0, len(tokens), window):
            block = tokens[start : start + window]
            rng.shuffle(block)
            tokens[start : start + window] = block
        return sent.replaced(tokens)

    out: Corpus = []
    for shuffle_parity in (1, 0):
        for idx, sent in enumerate(corpus):
            out.append(shuffled(sent) if idx % 2 == shuffle_parity else sent)
    return out


def _strip_diacritics(text: str) -> str:
    decomposed = unicodedata.normalize("NFD", text)
    return "".join(ch for ch in decomposed if not unicodedata.combining(ch))


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def surface_distance(a: str, b: str) -> int:
    """Levenshtein on case-folded, diacritic-stripped strings."""
    return levenshtein(_strip_diacritics(a.casefold()), _strip_diacritics(b.casefold()))


@dataclass
class TreatStats:
    trusted: int = 0
    copied: int = 0
    removed: int = 0
    ignored: int = 0
    skipped_unaligned: int = 0
    overlapping_hulls: list[tuple[int, tuple[int, int], tuple[int, int]]] = field(
        default_factory=list
    )


@dataclass
class PretreatResult:
    bitext: Bitext
    edits: list[Edit]
    stats: TreatStats


def ne_pretreat(
    bitext: Bitext,
    spans: Sequence[NESpan],
    alignments: Sequence[Alignment],
    policy: NEPolicy | None = None,
    lev_threshold: float = 3,
    unk_token: str = "unk",
) -> PretreatResult:
    """Repair mistranslated source-side NEs on the synthetic target side.

    For each source NE span, the aligned target tokens (contiguous hull of
    linked positions) are trusted when their surface is within
    ``lev_threshold`` edits of the source surface; otherwise the policy's
    pre-action replaces the hull with the source tokens (copy), the unk
    token (remove), or leaves it alone (ignore).
    """
    policy = policy or default_policy()
    if len(alignments) != len(bitext):
        raise ValueError("alignment count does not match bitext length")
    per_sent: dict[int, list[NESpan]] = {}
    for span in spans:
        if span.sent_index >= len(bitext) or span.end > len(bitext.src[span.sent_index]):
            raise ValueError("NE span %r out of bounds" % (span,))
        per_sent.setdefault(span.sent_index, []).append(span)

    stats = TreatStats()
    edits: list[Edit] = []
    new_tgt: list[Sentence] = []
    for idx, (src, tgt) in enumerate(bitext.pairs()):
        pending: list[tuple[tuple[int, int], tuple[str, ...]]] = []
        hulls: list[tuple[int, int]] = []
        for span in sorted(per_sent.get(idx, []), key=lambda s: -s.start):
            linked = [j for i, j in alignments[idx].links if span.start <= i < span.end]
            if not linked:
                stats.skipped_unaligned += 1
                continue
            hull = (min(linked), max(linked) + 1)
            hull_text = " ".join(tgt.tokens[hull[0] : hull[1]])
            src_text = " ".join(src.tokens[span.start : span.end])
            if surface_distance(src_text, hull_text) <= lev_threshold:
                stats.trusted += 1
                continue
            action = policy.pre[span.ne_type]
            if action == "ignore":
                stats.ignored += 1
                continue
            for other in hulls:
                if hull[0] < other[1] and other[0] < hull[1]:
                    stats.overlapping_hulls.append((idx, hull, other))
            hulls.append(hull)
            if action == "copy":
                replacement = src.tokens[span.start : span.end]
                stats.copied += 1
            else:
                replacement = (unk_token,)
                stats.removed += 1
            pending.append((hull, replacement))
        tokens = list(tgt.tokens)
        # descending hull order keeps earlier coordinates valid even when
        # replacements change the token count
        pending.sort(key=lambda item: -item[0][0])
        for (h0, h1), replacement in pending:
            tokens[h0:h1] = list(replacement)
            edits.append(Edit(idx, h0, h1, replacement))
        new_tgt.append(tgt.replaced(tokens))
    return PretreatResult(Bitext(bitext.src, new_tgt), edits, stats)


@dataclass
class PosttreatResult:
    sentence: Sentence
    edits: list[Edit]
    stats: TreatStats


def ne_posttreat(
    src: Sentence,
    hyp: Sentence,
    alignment: Alignment,
    spans: Sequence[NESpan],
    policy: NEPolicy | None = None,
) -> PosttreatResult:
    """Copy source tokens over hypothesis NE spans whose type says so.

    The replacement is the contiguous hull of source positions aligned to
    the span. Wrong alignments can duplicate neighbouring names; overlapping
    source hulls are therefore flagged, not prevented.
    """
    policy = policy or default_policy()
    stats = TreatStats()
    edits: list[Edit] = []
    pending: list[tuple[tuple[int, int], tuple[str, ...]]] = []
    src_hulls: list[tuple[int, int]] = []
    for span in sorted(spans, key=lambda s: -s.start):
        if span.end > len(hyp):
            raise ValueError("NE span %r beyond hypothesis length" % (span,))
        if policy.post[span.ne_type] == "ignore":
            stats.ignored += 1
            continue
        linked = [i for i, j in alignment.links if span.start <= j < span.end]
        if not linked:
            stats.skipped_unaligned += 1
            continue
        hull = (min(linked), max(linked) + 1)
        for other in src_hulls:
            if hull[0] < other[1] and other[0] < hull[1]:
                stats.overlapping_hulls.append((span.sent_index, hull, other))
        src_hulls.append(hull)
        pending.append(((span.start, span.end), src.tokens[hull[0] : hull[1]]))
        stats.copied += 1
    tokens = list(hyp.tokens)
    for (s0, s1), replacement in pending:
        tokens[s0:s1] = list(replacement)
        edits.append(Edit(hyp.line_index, s0, s1, replacement))
    return PosttreatResult(hyp.replaced(tokens), edits, stats)


_NUMBER_RE = re.compile(r"\d+([.,:/-]\d+)*")


@dataclass
class Gazetteer:
    """Optional single-token surface lists per NE type."""

    entries: dict[str, frozenset[str]] = field(default_factory=dict)

    def lookup(self, token: str) -> str | None:
        for ne_type in NE_TYPES:
            if token in self.entries.get(ne_type, frozenset()):
                return ne_type
        return None


def tag_nes_default(sent: Sentence, gazetteer: Gazetteer | None = None) -> list[NESpan]:
    """Rule-based stand-in tagger: digits are numbers, gazetteer hits take
    their listed type, and capitalized non-initial tokens default to
    personal names. External taggers plug in through the span TSV format.
    """
    spans: list[NESpan] = []
    for pos, tok in enumerate(sent.tokens):
        if _NUMBER_RE.fullmatch(tok):
            spans.append(NESpan(sent.line_index, pos, pos + 1, "number", tok))
            continue
        if gazetteer is not None:
            hit = gazetteer.lookup(tok)
            if hit is not None:
                spans.append(NESpan(sent.line_index, pos, pos + 1, hit, tok))
                continue
        if pos > 0 and tok[:1].isupper():
            spans.append(NESpan(sent.line_index, pos, pos + 1, "personal", tok))
    return spans


CZECH_QUOTES = ("„", "“")  # low-99 opening, left-66 closing


def normalize_quotes(sent: Sentence, style: tuple[str, str] = CZECH_QUOTES) -> Sentence:
    """Convert straight double quotes to alternating directional marks.

    An odd trailing quote becomes a closing mark; existing directional
    quotes pass through untouched.
    """
    opening, closing = style
    positions = [i for i, tok in enumerate(sent.tokens) if tok == '"']
    if not positions:
        return sent
    tokens = list(sent.tokens)
    odd = len(positions) % 2 == 1
    if odd:
        log.warning("sentence %d has an odd number of quotes", sent.line_index)
    for order, pos in enumerate(positions):
        if odd and order == len(positions) - 1:
            tokens[pos] = closing
        else:
            tokens[pos] = opening if order % 2 == 0 else closing
    return sent.replaced(tokens)


def normalize_quotes_corpus(
    corpus: Corpus, style: tuple[str, str] = CZECH_QUOTES
) -> tuple[Corpus, int]:
    out = []
    odd_count = 0
    for sent in corpus:
        n_quotes = sum(1 for t in sent.tokens if t == '"')
        odd_count += n_quotes % 2
        out.append(normalize_quotes(sent, style))
    return out, odd_count


def split_by_ne_presence(corpus: Corpus, spans: Sequence[NESpan]) -> tuple[list[int], list[int]]:
    """Stable partition of sentence indices into (with NEs, without NEs)."""
    tagged = {s.sent_index for s in spans}
    with_ne = [i for i in range(len(corpus)) if i in tagged]
    without = [i for i in range(len(corpus)) if i not in tagged]
    return with_ne, without
