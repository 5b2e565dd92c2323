"""Iterative back-translation orchestration and model selection.

One iteration takes the current A-to-B system, translates a monolingual
subset of language A into synthetic B, pairs synthetic with authentic text,
aligns and extracts a phrase table, optionally MERT-tunes, and yields the
reverse B-to-A system with its dev BLEU recorded. Directions alternate
across iterations; a divergence guard halts the loop when dev BLEU keeps
collapsing, and the best recorded system wins selection.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from .aligner import align_bitext, symmetrize, train_fastalign
from .corpus import Bitext, Corpus, Sentence
from .decoder import DecodeParams, FeatureWeights, decode
from .mert import mert_tune
from .mteval import corpus_bleu
from .ngram_lm import ArpaLM
from .ptable import PhraseTable, extract_phrases, score_extracted

log = logging.getLogger(__name__)


@dataclass
class SystemSnapshot:
    direction: str  # e.g. "a2b"
    table: PhraseTable
    lm: ArpaLM
    weights: FeatureWeights
    distortion_limit: int = 0
    provenance: str = "initial"
    artifacts: dict[str, Path] = field(default_factory=dict)


@dataclass
class IterationRecord:
    iteration: int
    direction: str
    synthetic_size: int
    dev_bleu: float
    snapshot: SystemSnapshot
    fallback_lines: int = 0


@dataclass
class BtConfig:
    subset_size: int = 4000
    em_iterations: int = 5
    max_phrase_len: int = 3
    beam_size: int = 10
    tune: str = "none"  # none | authentic | synthetic (caller supplies the dev set)
    mert_rounds: int = 2
    mert_nbest: int = 20
    mert_restarts: int = 8
    distortion_limit: int = 0
    divergence_delta: float = 3.0
    seed: int = 0


def reverse_direction(direction: str) -> str:
    a, b = direction.split("2")
    return "%s2%s" % (b, a)


def subsample(corpus: Corpus, size: int, seed: int) -> Corpus:
    """Uniform sample without replacement, original order preserved."""
    if size >= len(corpus):
        return list(corpus)
    import random

    idx = sorted(random.Random(seed).sample(range(len(corpus)), size))
    return [corpus[i] for i in idx]


def translate_corpus(
    system: SystemSnapshot, corpus: Sequence[Sentence], beam_size: int = 10
) -> tuple[list[Sentence], int]:
    """Single-best translations, order preserved; failures fall back to copies."""
    params = DecodeParams(beam_size=beam_size, distortion_limit=system.distortion_limit)
    out: list[Sentence] = []
    fallbacks = 0
    for i, sent in enumerate(corpus):
        try:
            entry = decode(sent, system.table, system.lm, system.weights, params)[0]
            out.append(Sentence(entry.translation, i))
        except Exception:
            log.exception("decoder failed on line %d; copying the source", sent.line_index)
            out.append(Sentence(sent.tokens, i))
            fallbacks += 1
    return out, fallbacks


def dev_bleu(system: SystemSnapshot, dev: Bitext, beam_size: int = 10) -> float:
    hyps, _ = translate_corpus(system, dev.src, beam_size)
    return corpus_bleu([h.tokens for h in hyps], [r.tokens for r in dev.tgt], cased=False).bleu


def make_synthetic_dev(system: SystemSnapshot, heldout: Corpus, beam_size: int = 10) -> Bitext:
    """Back-translate a held-out slice: (synthetic source, authentic target)."""
    synthetic, _ = translate_corpus(system, heldout, beam_size)
    return Bitext(synthetic, [Sentence(s.tokens, i) for i, s in enumerate(heldout)])


def train_from_bitext(
    bitext: Bitext,
    lm: ArpaLM,
    direction: str,
    cfg: BtConfig,
    dev: Bitext | None = None,
    provenance: str = "extracted",
) -> SystemSnapshot:
    """Supervised-style system from (possibly synthetic) parallel data."""
    fwd_model = train_fastalign(bitext, cfg.em_iterations)
    rev_model = train_fastalign(Bitext(bitext.tgt, bitext.src), cfg.em_iterations)
    fwd_aln = align_bitext(fwd_model, bitext)
    rev_aln = [a.transposed() for a in align_bitext(rev_model, Bitext(bitext.tgt, bitext.src))]
    merged = [symmetrize(f, r, "grow-diag-final-and") for f, r in zip(fwd_aln, rev_aln)]
    occurrences = extract_phrases(bitext, merged, cfg.max_phrase_len)
    table = score_extracted(occurrences, fwd_model.table, rev_model.table)
    weights = FeatureWeights()
    snapshot = SystemSnapshot(direction, table, lm, weights, cfg.distortion_limit, provenance)
    if cfg.tune != "none" and dev is not None:
        result = mert_tune(
            dev,
            table,
            lm,
            weights,
            rounds=cfg.mert_rounds,
            nbest_n=cfg.mert_nbest,
            random_restarts=cfg.mert_restarts,
            seed=cfg.seed,
            beam_size=cfg.beam_size,
            distortion_limit=cfg.distortion_limit,
        )
        snapshot = replace(snapshot, weights=result.weights)
    return snapshot


def run_bt_iteration(
    current: SystemSnapshot,
    mono_subset: Corpus,
    lm_target: ArpaLM,
    dev: Bitext,
    cfg: BtConfig,
    iteration: int = 1,
) -> IterationRecord:
    """One back-translation round: the A-to-B system begets the B-to-A system.

    ``mono_subset`` is authentic text in the current system's SOURCE language;
    its translations become the synthetic source side of the reverse system's
    training data. ``lm_target`` and ``dev`` belong to the reverse direction.
    """
    if not mono_subset:
        raise ValueError("empty monolingual subset")
    synthetic, fallbacks = translate_corpus(current, mono_subset, cfg.beam_size)
    authentic = [Sentence(s.tokens, i) for i, s in enumerate(mono_subset)]
    train = Bitext(synthetic, authentic)
    new_direction = reverse_direction(current.direction)
    snapshot = train_from_bitext(
        train, lm_target, new_direction, cfg, dev, provenance="bt-iteration-%d" % iteration
    )
    bleu = dev_bleu(snapshot, dev, cfg.beam_size)
    log.info("bt iteration %d (%s): dev BLEU %.2f", iteration, new_direction, bleu)
    return IterationRecord(iteration, new_direction, len(train), bleu, snapshot, fallbacks)


def select_best(records: Sequence[IterationRecord], criterion: str = "dev-BLEU") -> SystemSnapshot:
    """Highest dev BLEU wins; ties go to the earlier iteration."""
    if criterion != "dev-BLEU":
        raise ValueError("unsupported selection criterion %r" % criterion)
    if not records:
        raise ValueError("no iteration records to select from")
    best = records[0]
    for rec in records[1:]:
        if rec.dev_bleu > best.dev_bleu:
            best = rec
    return best.snapshot


def run_bt_loop(
    initial: SystemSnapshot,
    mono: dict[str, Corpus],
    lms: dict[str, ArpaLM],
    devs: dict[str, Bitext],
    iterations: int,
    cfg: BtConfig,
    initial_records: Sequence[IterationRecord] = (),
) -> list[IterationRecord]:
    """Alternate directions starting from ``initial``; guard against collapse.

    ``mono``/``lms``/``devs`` are keyed by language label; direction strings
    are "<src>2<tgt>". The guard halts after two consecutive iterations whose
    dev BLEU drops by more than ``cfg.divergence_delta``.
    """
    records = list(initial_records)
    current = initial
    consecutive_drops = 0
    last_bleu: dict[str, float] = {r.direction: r.dev_bleu for r in records}
    for it in range(1, iterations + 1):
        src_lang = current.direction.split("2")[0]
        subset = subsample(mono[src_lang], cfg.subset_size, cfg.seed + it)
        new_direction = reverse_direction(current.direction)
        rec = run_bt_iteration(
            current, subset, lms[src_lang], devs[new_direction], cfg, iteration=it
        )
        records.append(rec)
        prev = last_bleu.get(rec.direction)
        if prev is not None and rec.dev_bleu < prev - cfg.divergence_delta:
            consecutive_drops += 1
            if consecutive_drops >= 2:
                log.warning("divergence guard tripped at iteration %d", it)
                break
        else:
            consecutive_drops = 0
        last_bleu[rec.direction] = rec.dev_bleu
        current = rec.snapshot
    return records


@dataclass
class TranslationRun:
    path: Path
    lines: int
    fallback_lines: int
    resumed_at: int = 0


def translate_full_corpus(
    system: SystemSnapshot,
    corpus: Corpus,
    out_path: str | Path,
    chunk_size: int = 1000,
    beam_size: int = 10,
) -> TranslationRun:
    """Translate a whole corpus into a "synthetic ||| authentic" bitext file.

    Work proceeds in chunks with a progress sidecar, so an interrupted run
    resumes at the recorded chunk boundary and, decoding being deterministic,
    produces a byte-identical file. The sidecar disappears on completion.
    """
    from .corpus import SEP

    out_path = Path(out_path)
    progress_path = Path(str(out_path) + ".progress")
    done = 0
    fallbacks = 0
    if progress_path.exists() and out_path.exists():
        done_s, fallback_s = progress_path.read_text().split()
        done, fallbacks = int(done_s), int(fallback_s)
        with open(out_path, encoding="utf-8") as fh:
            existing = sum(1 for _ in fh)
        if existing != done:
            log.warning("progress file disagrees with output (%d vs %d); restarting", done, existing)
            done = fallbacks = 0
    resumed_at = done
    mode = "a" if done else "w"
    with open(out_path, mode, encoding="utf-8") as fh:
        for start in range(done, len(corpus), chunk_size):
            chunk = corpus[start : start + chunk_size]
            translated, chunk_fallbacks = translate_corpus(system, chunk, beam_size)
            fallbacks += chunk_fallbacks
            for synthetic, authentic in zip(translated, chunk):
                fh.write(synthetic.text() + SEP + authentic.text() + "\n")
            fh.flush()
            done = start + len(chunk)
            progress_path.write_text("%d %d\n" % (done, fallbacks))
    if progress_path.exists():
        progress_path.unlink()
    return TranslationRun(out_path, len(corpus), fallbacks, resumed_at)
