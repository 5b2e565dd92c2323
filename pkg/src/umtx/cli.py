"""umtx command line: per-stage subcommands plus the full pipeline."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import textproc
from .aligner import align_bitext, symmetrize, train_fastalign, write_pharaoh
from .backtrans import SystemSnapshot, translate_corpus
from .config import default_config, load_config
from .corpus import Bitext, read_bitext, read_corpus, write_bitext, write_corpus
from .decoder import DecodeParams, FeatureWeights, decode, write_nbest
from .mert import mert_tune
from .mteval import corpus_bleu
from .ngram_lm import count_ngrams, estimate_kn, read_arpa, write_arpa
from .phrasevec import PhraseVocab, SgnsConfig, build_phrase_vocab, read_word2vec, train_sgns, write_word2vec
from .pipeline import run_pipeline
from .ptable import induce_unsupervised, read_moses, write_moses
from .synthfix import DiacriticProfile, normalize_quotes_corpus, reorder_augment, strip_untranslated
from .xmap import (
    EmbeddingMatrix,
    normalize_embeddings,
    seed_frequency,
    seed_identical,
    seed_numerals,
    self_learning_map,
)


def cmd_preprocess(args) -> int:
    lines = open(args.input, encoding="utf-8") if args.input else sys.stdin
    sentences = [textproc.tokenize(line, i) for i, line in enumerate(lines)]
    if args.truecase_model:
        model = textproc.train_truecaser(sentences)
        model.save(args.truecase_model)
        sentences = [textproc.apply_truecase(s, model) for s in sentences]
    kept = [s for s in sentences if textproc.filter_by_length(s, args.min_len, args.max_len)]
    if args.keep_lang:
        if not args.langid_model:
            print("--keep-lang needs --langid-model", file=sys.stderr)
            return 2
        model = textproc.LangIdModel.load(args.langid_model)
        kept = textproc.filter_corpus_language(kept, model, args.keep_lang)
    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    for s in kept:
        out.write(s.text() + "\n")
    print("kept %d of %d lines" % (len(kept), len(sentences)), file=sys.stderr)
    return 0


def cmd_embed(args) -> int:
    corpus = read_corpus(args.corpus)
    vocab = build_phrase_vocab(corpus, (args.cap1, args.cap2, args.cap3))
    if args.vocab_out:
        vocab.save(args.vocab_out)
    cfg = SgnsConfig(
        window=args.window,
        dim=args.dim,
        negatives=args.neg,
        epochs=args.epochs,
        seed=args.seed,
    )
    emb = train_sgns(corpus, vocab, cfg)
    write_word2vec(emb, args.output)
    return 0


def cmd_map(args) -> int:
    src = normalize_embeddings(read_word2vec(args.src_emb))
    tgt = normalize_embeddings(read_word2vec(args.tgt_emb))
    src_vocab = PhraseVocab.load(args.src_vocab)
    tgt_vocab = PhraseVocab.load(args.tgt_vocab)
    if args.seed_mode == "identical":
        seed = seed_identical(src_vocab, tgt_vocab)
    elif args.seed_mode == "numerals":
        seed = seed_numerals(src_vocab, tgt_vocab)
    else:
        seed = seed_frequency(src_vocab, tgt_vocab, args.seed_pairs)
    solution = self_learning_map(src.rows, tgt.rows, seed, args.max_iters, args.tol)
    write_word2vec(
        EmbeddingMatrix(src.rows @ solution.wx, "centered+unit", src.labels), args.src_out
    )
    write_word2vec(
        EmbeddingMatrix(tgt.rows @ solution.wz, "centered+unit", tgt.labels), args.tgt_out
    )
    if args.dict_out:
        with open(args.dict_out, "w", encoding="utf-8") as fh:
            for s, t in solution.final_dictionary:
                fh.write("%s\t%s\n" % (src.labels[s], tgt.labels[t]))
    return 0


def cmd_table(args) -> int:
    table = induce_unsupervised(
        read_word2vec(args.src_emb), read_word2vec(args.tgt_emb), args.k, args.temperature
    )
    write_moses(table, args.output)
    return 0


def cmd_lm(args) -> int:
    lm = estimate_kn(count_ngrams(read_corpus(args.corpus), args.order))
    write_arpa(lm, args.output)
    return 0


def cmd_align(args) -> int:
    bitext = read_bitext(args.bitext)
    fwd_model = train_fastalign(bitext, args.iterations)
    fwd = align_bitext(fwd_model, bitext)
    if args.heuristic == "forward":
        merged = fwd
    else:
        flipped = Bitext(bitext.tgt, bitext.src)
        rev_model = train_fastalign(flipped, args.iterations)
        rev = [a.transposed() for a in align_bitext(rev_model, flipped)]
        merged = [symmetrize(f, r, args.heuristic) for f, r in zip(fwd, rev)]
    write_pharaoh(merged, args.output)
    return 0


def _load_system(args) -> SystemSnapshot:
    weights = FeatureWeights.load(args.weights) if args.weights else FeatureWeights()
    return SystemSnapshot(
        "cli",
        read_moses(args.table),
        read_arpa(args.lm),
        weights,
        args.dl,
    )


def cmd_decode(args) -> int:
    system = _load_system(args)
    corpus = read_corpus(args.input)
    if args.nbest and args.nbest_out:
        params = DecodeParams(args.beam, args.dl, args.nbest)
        nbests = {
            i: decode(s, system.table, system.lm, system.weights, params)
            for i, s in enumerate(corpus)
        }
        write_nbest(nbests, args.nbest_out)
    translations, fallbacks = translate_corpus(system, corpus, args.beam)
    write_corpus(translations, args.output)
    if fallbacks:
        print("%d lines fell back to verbatim copies" % fallbacks, file=sys.stderr)
    return 0


def cmd_tune(args) -> int:
    dev = read_bitext(args.dev)
    result = mert_tune(
        dev,
        read_moses(args.table),
        read_arpa(args.lm),
        FeatureWeights.load(args.weights) if args.weights else FeatureWeights(),
        rounds=args.rounds,
        nbest_n=args.nbest,
        random_restarts=args.restarts,
        seed=args.seed,
        beam_size=args.beam,
        distortion_limit=args.dl,
    )
    result.weights.save(args.output)
    print(
        "accepted pool BLEU: %s" % ", ".join("%.2f" % b for b in result.accepted_bleus),
        file=sys.stderr,
    )
    return 0


def cmd_fix(args) -> int:
    bitext = read_bitext(args.input) if args.input else None
    if args.strip_untranslated:
        if bitext is None:
            lines = [line.rstrip("\n") for line in sys.stdin]
            pairs = [tuple(part.split() for part in line.split(" ||| ")) for line in lines]
            bitext = Bitext.from_pairs(pairs)
        profile = DiacriticProfile.czech()
        result = strip_untranslated(bitext, profile, args.unk_token)
        out = args.output
        if out:
            write_bitext(result.bitext, out)
        else:
            for s, t in result.bitext.pairs():
                sys.stdout.write(s.text() + " ||| " + t.text() + "\n")
        print("replaced %d tokens" % result.replaced, file=sys.stderr)
        return 0
    if args.reorder:
        corpus = read_corpus(args.input)
        out = reorder_augment(corpus, args.window, args.seed)
        write_corpus(out, args.output)
        return 0
    if args.quotes:
        corpus = read_corpus(args.input)
        fixed, odd = normalize_quotes_corpus(corpus)
        write_corpus(fixed, args.output)
        if odd:
            print("%d sentences had odd quote counts" % odd, file=sys.stderr)
        return 0
    print("nothing to do: pass --strip-untranslated, --reorder or --quotes", file=sys.stderr)
    return 2


def cmd_bleu(args) -> int:
    hyps = [s.tokens for s in read_corpus(args.hyp)]
    refs = [s.tokens for s in read_corpus(args.ref)]
    report = corpus_bleu(hyps, refs, cased=args.cased)
    print(report.format())
    return 0


def cmd_backtranslate(args) -> int:
    config = load_config(args.config) if args.config else default_config()
    if args.iters is not None:
        config.values["backtrans"]["iterations"] = args.iters
    if args.subset is not None:
        config.values["backtrans"]["subset"] = args.subset
    if args.tune is not None:
        config.values["tune"]["mode"] = args.tune
    if args.seed is not None:
        config.values["global"]["seed"] = args.seed
    run_pipeline(config, args.workspace, resume=not args.no_resume)
    return 0


def cmd_pipeline(args) -> int:
    config = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        config.values["global"]["seed"] = args.seed
    manifest = run_pipeline(config, args.workspace, resume=not args.no_resume)
    evaluate = manifest.latest("evaluate")
    if evaluate is not None:
        for key in sorted(evaluate.metrics):
            print("%s = %s" % (key, evaluate.metrics[key]))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="umtx", description=__doc__)
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="tokenize, truecase and filter a corpus")
    p.add_argument("--input"), p.add_argument("--output")
    p.add_argument("--min-len", type=int, default=3), p.add_argument("--max-len", type=int, default=80)
    p.add_argument("--truecase-model")
    p.add_argument("--keep-lang"), p.add_argument("--langid-model")
    p.set_defaults(fn=cmd_preprocess)

    p = sub.add_parser("embed", help="build vocabulary and train phrase embeddings")
    p.add_argument("corpus"), p.add_argument("output")
    p.add_argument("--vocab-out")
    p.add_argument("--window", type=int, default=5), p.add_argument("--dim", type=int, default=300)
    p.add_argument("--neg", type=int, default=10), p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--cap1", type=int, default=200000)
    p.add_argument("--cap2", type=int, default=400000)
    p.add_argument("--cap3", type=int, default=400000)
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("map", help="map two embedding spaces together")
    p.add_argument("src_emb"), p.add_argument("tgt_emb")
    p.add_argument("src_vocab"), p.add_argument("tgt_vocab")
    p.add_argument("src_out"), p.add_argument("tgt_out")
    p.add_argument("--dict-out")
    p.add_argument("--seed-mode", choices=["identical", "numerals", "frequency"], default="identical")
    p.add_argument("--seed-pairs", type=int, default=25)
    p.add_argument("--csls-k", type=int, default=10)
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(fn=cmd_map)

    p = sub.add_parser("table", help="induce an unsupervised phrase table")
    p.add_argument("src_emb"), p.add_argument("tgt_emb"), p.add_argument("output")
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--temperature", type=float, default=0.1)
    p.set_defaults(fn=cmd_table)

    p = sub.add_parser("lm", help="estimate a Kneser-Ney ARPA language model")
    p.add_argument("corpus"), p.add_argument("output")
    p.add_argument("--order", type=int, default=5)
    p.set_defaults(fn=cmd_lm)

    p = sub.add_parser("align", help="train fast_align-style alignments")
    p.add_argument("bitext"), p.add_argument("output")
    p.add_argument("--iterations", type=int, default=5)
    p.add_argument(
        "--heuristic",
        choices=["forward", "intersection", "union", "grow-diag-final-and"],
        default="grow-diag-final-and",
    )
    p.set_defaults(fn=cmd_align)

    p = sub.add_parser("decode", help="translate a corpus with a phrase table and LM")
    p.add_argument("input"), p.add_argument("output")
    p.add_argument("--table", required=True), p.add_argument("--lm", required=True)
    p.add_argument("--weights")
    p.add_argument("--beam", type=int, default=100)
    p.add_argument("--dl", type=int, default=0)
    p.add_argument("--nbest", type=int, default=0), p.add_argument("--nbest-out")
    p.set_defaults(fn=cmd_decode)

    p = sub.add_parser("tune", help="MERT-tune feature weights on a dev bitext")
    p.add_argument("dev"), p.add_argument("output")
    p.add_argument("--table", required=True), p.add_argument("--lm", required=True)
    p.add_argument("--weights")
    p.add_argument("--rounds", type=int, default=5), p.add_argument("--nbest", type=int, default=50)
    p.add_argument("--restarts", type=int, default=20), p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beam", type=int, default=20), p.add_argument("--dl", type=int, default=0)
    p.set_defaults(fn=cmd_tune)

    p = sub.add_parser("fix", help="synthetic-corpus repair operations")
    p.add_argument("--input"), p.add_argument("--output")
    p.add_argument("--strip-untranslated", action="store_true")
    p.add_argument("--profile", choices=["czech"], default="czech")
    p.add_argument("--unk-token", default="unk")
    p.add_argument("--reorder", action="store_true")
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quotes", action="store_true")
    p.set_defaults(fn=cmd_fix)

    p = sub.add_parser("bleu", help="corpus BLEU of hypothesis vs reference file")
    p.add_argument("hyp"), p.add_argument("ref")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--cased", dest="cased", action="store_true")
    group.add_argument("--uncased", dest="cased", action="store_false")
    p.set_defaults(cased=False, fn=cmd_bleu)

    p = sub.add_parser("backtranslate", help="run the pipeline through back-translation")
    p.add_argument("--config"), p.add_argument("--workspace", required=True)
    p.add_argument("--iters", type=int), p.add_argument("--subset", type=int)
    p.add_argument("--tune", choices=["authentic", "synthetic", "none"])
    p.add_argument("--seed", type=int)
    p.add_argument("--no-resume", action="store_true")
    p.set_defaults(fn=cmd_backtranslate)

    p = sub.add_parser("pipeline", help="run the full pipeline from a config file")
    p.add_argument("--config"), p.add_argument("--workspace", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-resume", action="store_true")
    p.set_defaults(fn=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except Exception as err:  # surface a clean diagnostic, nonzero exit
        print("umtx: error: %s" % err, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
