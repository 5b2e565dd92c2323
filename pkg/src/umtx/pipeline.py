"""End-to-end pipeline: corpora to synthetic-corpus variants with a manifest.

Stage order: fixture/import, preprocess, vocabulary and embeddings per
language, cross-lingual mapping, unsupervised phrase tables both ways,
language models, initial systems, iterative back-translation, model
selection, full-corpus translation, the repair-variant chain (strip ->
reorder -> NE treatment), and evaluation. Every stage hashes its config,
digests its inputs and outputs into the manifest, and is skipped on resume
when nothing changed; any parameter change re-runs that stage and, through
changed digests, everything downstream. Stage timings go to the log, never
into the manifest, which stays byte-reproducible across seeded runs.
"""

from __future__ import annotations

import logging
import shutil
import time
from pathlib import Path

import numpy as np

from . import aligner, backtrans, cipher, synthfix, textproc
from .backtrans import BtConfig, IterationRecord, SystemSnapshot
from .config import PipelineConfig
from .corpus import Bitext, Corpus, Sentence, read_bitext, read_corpus, write_bitext, write_corpus
from .decoder import DecodeParams, FeatureWeights
from .manifest import PipelineManifest, StageRecord, config_digest, file_digest
from .mert import mert_tune
from .mteval import corpus_bleu
from .ngram_lm import count_ngrams, estimate_kn, read_arpa, write_arpa
from .phrasevec import PhraseVocab, SgnsConfig, build_phrase_vocab, read_word2vec, train_sgns, write_word2vec
from .ptable import PhraseTable, induce_unsupervised, read_moses, write_moses
from .xmap import (
    EmbeddingMatrix,
    SeedDictionary,
    normalize_embeddings,
    seed_frequency,
    seed_identical,
    seed_numerals,
    self_learning_map,
)

log = logging.getLogger(__name__)


class Pipeline:
    def __init__(self, config: PipelineConfig, workspace: str | Path, resume: bool = True):
        self.cfg = config
        self.ws = Path(workspace)
        self.ws.mkdir(parents=True, exist_ok=True)
        self.manifest = PipelineManifest(self.ws / "manifest.txt")
        self.resume = resume
        self.src = str(config.get("global", "src_label"))
        self.tgt = str(config.get("global", "tgt_label"))
        self.seed = int(config.get("global", "seed"))
        (self.ws / "config.resolved.ini").write_text(config.dump(), encoding="utf-8")

    # ---- plumbing -------------------------------------------------------

    def p(self, rel: str) -> Path:
        return self.ws / rel

    def _rel(self, path: Path) -> str:
        return str(Path(path).relative_to(self.ws))

    def _stage(self, name: str, stage_cfg: dict, inputs: list[Path], outputs: list[Path], fn):
        chash = config_digest(stage_cfg)
        in_digests = {self._rel(p): file_digest(p) for p in sorted(inputs)}
        if self.resume:
            rec = self.manifest.latest(name)
            if rec is not None and rec.config_hash == chash and rec.inputs == in_digests:
                intact = all(
                    (self.ws / rel).exists() and file_digest(self.ws / rel) == digest
                    for rel, digest in rec.outputs.items()
                )
                if intact:
                    log.info("stage %s: up to date, skipping", name)
                    return rec
        started = time.perf_counter()
        metrics = fn() or {}
        log.info("stage %s: %.2fs", name, time.perf_counter() - started)
        out_digests = {self._rel(p): file_digest(p) for p in sorted(outputs)}
        record = StageRecord(
            name,
            chash,
            self.seed,
            in_digests,
            out_digests,
            {k: str(v) for k, v in metrics.items()},
        )
        self.manifest.append(record)
        return record

    def _direction_langs(self, direction: str) -> tuple[str, str]:
        a, b = direction.split("2")
        return a, b

    def _decode_params(self) -> DecodeParams:
        return DecodeParams(
            beam_size=int(self.cfg.get("decode", "beam")),
            distortion_limit=int(self.cfg.get("decode", "distortion_limit")),
            unk_word_cost=float(self.cfg.get("decode", "unk_cost")),
        )

    def _bt_config(self) -> BtConfig:
        return BtConfig(
            subset_size=int(self.cfg.get("backtrans", "subset")),
            em_iterations=int(self.cfg.get("backtrans", "em_iterations")),
            beam_size=int(self.cfg.get("decode", "beam")),
            tune=str(self.cfg.get("tune", "mode")),
            mert_rounds=int(self.cfg.get("tune", "rounds")),
            mert_nbest=int(self.cfg.get("tune", "nbest")),
            mert_restarts=int(self.cfg.get("tune", "restarts")),
            distortion_limit=int(self.cfg.get("backtrans", "post_distortion_limit")),
            divergence_delta=float(self.cfg.get("backtrans", "divergence_delta")),
            seed=self.seed,
        )

    def load_system(self, name: str, direction: str, distortion_limit: int, provenance: str) -> SystemSnapshot:
        _, tgt_lang = self._direction_langs(direction)
        return SystemSnapshot(
            direction,
            read_moses(self.p("%s.moses" % name)),
            read_arpa(self.p("lm.%s.arpa" % tgt_lang)),
            FeatureWeights.load(self.p("%s.weights.txt" % name)),
            distortion_limit,
            provenance,
        )

    def _read_records(self, path: Path) -> list[dict]:
        rows = []
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n").split("\t")
            for line in fh:
                rows.append(dict(zip(header, line.rstrip("\n").split("\t"))))
        return rows

    def _write_records(self, path: Path, rows: list[dict]) -> None:
        header = ["name", "iteration", "direction", "size", "dev_bleu", "provenance", "distortion_limit"]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\t".join(header) + "\n")
            for row in rows:
                fh.write("\t".join(str(row[k]) for k in header) + "\n")

    # ---- stages ---------------------------------------------------------

    def stage_data(self) -> None:
        data = self.cfg["data"]
        outputs = [
            self.p("mono.%s.txt" % self.src),
            self.p("mono.%s.txt" % self.tgt),
            self.p("dev.txt"),
            self.p("test.txt"),
        ]
        if bool(data["generate_cipher"]):
            outputs.append(self.p("cipher_map.tsv"))

            def fn():
                fixture = cipher.generate_cipher_pair(
                    int(data["cipher_sentences"]),
                    int(data["cipher_vocab"]),
                    self.seed,
                    int(data["cipher_dev"]),
                    int(data["cipher_test"]),
                )
                write_corpus(fixture.mono_a, outputs[0])
                write_corpus(fixture.mono_b, outputs[1])
                write_bitext(fixture.dev, self.p("dev.txt"))
                write_bitext(fixture.test, self.p("test.txt"))
                with open(self.p("cipher_map.tsv"), "w", encoding="utf-8") as fh:
                    for a, b in sorted(fixture.mapping.items()):
                        fh.write("%s\t%s\n" % (a, b))
                return {"sentences": int(data["cipher_sentences"])}

            self._stage("data", self.cfg.stage_dict("data", "global"), [], outputs, fn)
        else:

            def fn():
                shutil.copyfile(str(data["mono_src"]), outputs[0])
                shutil.copyfile(str(data["mono_tgt"]), outputs[1])
                shutil.copyfile(str(data["dev"]), self.p("dev.txt"))
                shutil.copyfile(str(data["test"]), self.p("test.txt"))
                return {}

            self._stage("data", self.cfg.stage_dict("data", "global"), [], outputs, fn)

    def stage_preprocess(self) -> None:
        pre = self.cfg["preprocess"]
        langid_model = None
        if bool(pre["langid"]):
            corpora = {
                lang: [textproc.tokenize(line) for line in self.p("mono.%s.txt" % lang).read_text(encoding="utf-8").splitlines()]
                for lang in (self.src, self.tgt)
            }
            langid_model = textproc.train_langid(corpora, int(pre["langid_order"]))
        for lang in (self.src, self.tgt):
            inp = self.p("mono.%s.txt" % lang)
            out = self.p("pre.%s.txt" % lang)
            outputs = [out]
            truecase_path = self.p("truecase.%s.tsv" % lang)
            if bool(pre["truecase"]):
                outputs.append(truecase_path)

            def fn(inp=inp, out=out, lang=lang, truecase_path=truecase_path):
                with open(inp, encoding="utf-8") as fh:
                    sentences = [textproc.tokenize(line, i) for i, line in enumerate(fh)]
                if bool(pre["truecase"]):
                    model = textproc.train_truecaser(sentences)
                    model.save(truecase_path)
                    sentences = [textproc.apply_truecase(s, model) for s in sentences]
                kept = [
                    s
                    for s in sentences
                    if textproc.filter_by_length(s, int(pre["min_len"]), int(pre["max_len"]))
                ]
                if langid_model is not None:
                    kept = textproc.filter_corpus_language(kept, langid_model, lang)
                write_corpus(kept, out)
                return {"read": len(sentences), "kept": len(kept)}

            self._stage(
                "preprocess.%s" % lang, self.cfg.stage_dict("preprocess"), [inp], outputs, fn
            )
        for split in ("dev", "test"):
            inp = self.p("%s.txt" % split)
            out = self.p("pre.%s.txt" % split)

            def fn(inp=inp, out=out):
                bt = read_bitext(inp)
                src = [textproc.tokenize(s.text(), i) for i, s in enumerate(bt.src)]
                tgt = [textproc.tokenize(t.text(), i) for i, t in enumerate(bt.tgt)]
                write_bitext(Bitext(src, tgt), out)
                return {"pairs": len(src)}

            self._stage("preprocess.%s" % split, self.cfg.stage_dict("preprocess"), [inp], [out], fn)

    def stage_vocab_and_embed(self) -> None:
        vcfg = self.cfg["vocab"]
        ecfg = self.cfg["embed"]
        caps = (int(vcfg["cap1"]), int(vcfg["cap2"]), int(vcfg["cap3"]))
        for offset, lang in enumerate((self.src, self.tgt)):
            pre = self.p("pre.%s.txt" % lang)
            vocab_path = self.p("vocab.%s.tsv" % lang)

            def vfn(pre=pre, vocab_path=vocab_path):
                vocab = build_phrase_vocab(read_corpus(pre), caps)
                vocab.save(vocab_path)
                return {"entries": len(vocab)}

            self._stage("vocab.%s" % lang, self.cfg.stage_dict("vocab"), [pre], [vocab_path], vfn)

            emb_path = self.p("emb.%s.vec" % lang)

            def efn(pre=pre, vocab_path=vocab_path, emb_path=emb_path, offset=offset):
                vocab = PhraseVocab.load(vocab_path)
                sgns = SgnsConfig(
                    window=int(ecfg["window"]),
                    dim=int(ecfg["dim"]),
                    negatives=int(ecfg["negatives"]),
                    epochs=int(ecfg["epochs"]),
                    learning_rate=float(ecfg["learning_rate"]),
                    seed=self.seed * 1000 + offset,
                )
                emb = train_sgns(read_corpus(pre), vocab, sgns)
                write_word2vec(emb, emb_path)
                return {"rows": len(emb), "dim": emb.dim}

            self._stage(
                "embed.%s" % lang,
                self.cfg.stage_dict("embed", "global"),
                [pre, vocab_path],
                [emb_path],
                efn,
            )

    def stage_map(self) -> None:
        mcfg = self.cfg["map"]
        inputs = [
            self.p("emb.%s.vec" % self.src),
            self.p("emb.%s.vec" % self.tgt),
            self.p("vocab.%s.tsv" % self.src),
            self.p("vocab.%s.tsv" % self.tgt),
        ]
        outputs = [
            self.p("mapped.%s.vec" % self.src),
            self.p("mapped.%s.vec" % self.tgt),
            self.p("dict.tsv"),
        ]

        def fn():
            src_emb = normalize_embeddings(read_word2vec(inputs[0]))
            tgt_emb = normalize_embeddings(read_word2vec(inputs[1]))
            src_vocab = PhraseVocab.load(inputs[2])
            tgt_vocab = PhraseVocab.load(inputs[3])
            mode = str(mcfg["seed_mode"])
            if mode == "identical":
                seed = seed_identical(src_vocab, tgt_vocab)
            elif mode == "numerals":
                seed = seed_numerals(src_vocab, tgt_vocab)
            elif mode == "frequency":
                seed = seed_frequency(src_vocab, tgt_vocab, int(mcfg["seed_pairs"]))
            else:
                raise ValueError("unknown seed mode %r" % mode)
            learn_src, learn_tgt = src_emb.rows, tgt_emb.rows
            if bool(mcfg["learn_unigrams"]):
                n_src_uni = len(src_vocab.unigram_entries())
                n_tgt_uni = len(tgt_vocab.unigram_entries())
                learn_src = src_emb.rows[:n_src_uni]
                learn_tgt = tgt_emb.rows[:n_tgt_uni]
                kept = [(s, t) for s, t in seed.pairs if s < n_src_uni and t < n_tgt_uni]
                if not kept:
                    raise ValueError("seed dictionary has no unigram pairs to learn from")
                seed = SeedDictionary(kept, seed.provenance)
            solution = self_learning_map(
                learn_src,
                learn_tgt,
                seed,
                int(mcfg["max_iters"]),
                float(mcfg["tol"]),
            )
            mapped_src = EmbeddingMatrix(src_emb.rows @ solution.wx, "centered+unit", src_emb.labels)
            mapped_tgt = EmbeddingMatrix(tgt_emb.rows @ solution.wz, "centered+unit", tgt_emb.labels)
            write_word2vec(mapped_src, outputs[0])
            write_word2vec(mapped_tgt, outputs[1])
            with open(outputs[2], "w", encoding="utf-8") as fh:
                for s, t in solution.final_dictionary:
                    fh.write("%s\t%s\n" % (src_emb.labels[s], tgt_emb.labels[t]))
            objective = solution.objective_trace[-1] if solution.objective_trace else 0.0
            return {
                "seed_pairs": len(seed),
                "iterations": len(solution.objective_trace),
                "objective": repr(objective),
            }

        self._stage("map", self.cfg.stage_dict("map"), inputs, outputs, fn)

    def stage_tables(self) -> None:
        tcfg = self.cfg["table"]
        for direction in ("%s2%s" % (self.src, self.tgt), "%s2%s" % (self.tgt, self.src)):
            src_lang, tgt_lang = self._direction_langs(direction)
            inputs = [self.p("mapped.%s.vec" % src_lang), self.p("mapped.%s.vec" % tgt_lang)]
            out = self.p("initial.%s.moses" % direction)

            def fn(inputs=inputs, out=out):
                src_emb = read_word2vec(inputs[0])
                tgt_emb = read_word2vec(inputs[1])
                table = induce_unsupervised(
                    src_emb, tgt_emb, int(tcfg["k"]), float(tcfg["temperature"])
                )
                write_moses(table, out)
                return {"sources": len(table)}

            self._stage("table.%s" % direction, self.cfg.stage_dict("table"), inputs, [out], fn)

    def stage_lms(self) -> None:
        order = int(self.cfg.get("lm", "order"))
        for lang in (self.src, self.tgt):
            pre = self.p("pre.%s.txt" % lang)
            out = self.p("lm.%s.arpa" % lang)

            def fn(pre=pre, out=out):
                lm = estimate_kn(count_ngrams(read_corpus(pre), order))
                write_arpa(lm, out)
                return {"vocab": len(lm.vocab)}

            self._stage("lm.%s" % lang, self.cfg.stage_dict("lm"), [pre], [out], fn)

    def _oriented_dev(self, direction: str) -> Bitext:
        dev = read_bitext(self.p("pre.dev.txt"))
        if direction == "%s2%s" % (self.src, self.tgt):
            return dev
        return Bitext(dev.tgt, dev.src)

    def stage_initial_systems(self) -> None:
        tune = self.cfg["tune"]
        bt_cfg = self._bt_config()
        for direction in ("%s2%s" % (self.src, self.tgt), "%s2%s" % (self.tgt, self.src)):
            src_lang, tgt_lang = self._direction_langs(direction)
            name = "initial.%s" % direction
            inputs = [
                self.p("initial.%s.moses" % direction),
                self.p("lm.%s.arpa" % tgt_lang),
                self.p("pre.dev.txt"),
                self.p("pre.%s.txt" % tgt_lang),
            ]
            if str(tune["mode"]) == "synthetic":
                inputs.append(self.p("initial.%s.moses" % ("%s2%s" % (tgt_lang, src_lang))))
                inputs.append(self.p("lm.%s.arpa" % src_lang))
            weights_out = self.p("%s.weights.txt" % name)

            def fn(direction=direction, tgt_lang=tgt_lang, src_lang=src_lang, name=name, weights_out=weights_out):
                table = read_moses(self.p("initial.%s.moses" % direction), "unsupervised")
                lm = read_arpa(self.p("lm.%s.arpa" % tgt_lang))
                weights = FeatureWeights()
                system = SystemSnapshot(direction, table, lm, weights, 0, "initial")
                mode = str(tune["mode"])
                if bool(tune["initial"]) and mode != "none":
                    if mode == "synthetic":
                        reverse = "%s2%s" % (tgt_lang, src_lang)
                        rev_table = read_moses(self.p("initial.%s.moses" % reverse), "unsupervised")
                        rev_lm = read_arpa(self.p("lm.%s.arpa" % src_lang))
                        rev_system = SystemSnapshot(reverse, rev_table, rev_lm, FeatureWeights(), 0, "initial")
                        heldout = read_corpus(self.p("pre.%s.txt" % tgt_lang))[
                            -int(tune["synthetic_dev_size"]) :
                        ]
                        dev = backtrans.make_synthetic_dev(rev_system, heldout, bt_cfg.beam_size)
                    else:
                        dev = self._oriented_dev(direction)
                    result = mert_tune(
                        dev,
                        table,
                        lm,
                        weights,
                        rounds=int(tune["rounds"]),
                        nbest_n=int(tune["nbest"]),
                        random_restarts=int(tune["restarts"]),
                        seed=self.seed,
                        beam_size=bt_cfg.beam_size,
                        distortion_limit=0,
                    )
                    system = SystemSnapshot(direction, table, lm, result.weights, 0, "initial")
                system.weights.save(weights_out)
                bleu = backtrans.dev_bleu(system, self._oriented_dev(direction), bt_cfg.beam_size)
                return {"dev_bleu": repr(bleu)}

            self._stage(
                "initial.%s" % direction,
                self.cfg.stage_dict("tune", "decode", "global"),
                inputs,
                [weights_out],
                fn,
            )
        records_path = self.p("initial.records.tsv")

        def record_fn():
            # dev BLEU lives in the manifest whether the stages ran or were skipped
            rows = []
            for direction in ("%s2%s" % (self.src, self.tgt), "%s2%s" % (self.tgt, self.src)):
                rec = self.manifest.latest("initial.%s" % direction)
                rows.append(
                    {
                        "name": "initial.%s" % direction,
                        "iteration": 0,
                        "direction": direction,
                        "size": 0,
                        "dev_bleu": rec.metrics["dev_bleu"],
                        "provenance": "initial",
                        "distortion_limit": 0,
                    }
                )
            self._write_records(records_path, rows)
            return {}

        self._stage(
            "initial.records",
            self.cfg.stage_dict("tune", "decode"),
            [self.p("initial.%s.weights.txt" % d) for d in ("%s2%s" % (self.src, self.tgt), "%s2%s" % (self.tgt, self.src))],
            [records_path],
            record_fn,
        )

    def stage_backtranslate(self) -> None:
        bt_cfg = self._bt_config()
        iterations = int(self.cfg.get("backtrans", "iterations"))
        a2b = "%s2%s" % (self.src, self.tgt)
        inputs = [
            self.p("initial.%s.moses" % a2b),
            self.p("initial.%s.weights.txt" % a2b),
            self.p("lm.%s.arpa" % self.src),
            self.p("lm.%s.arpa" % self.tgt),
            self.p("pre.%s.txt" % self.src),
            self.p("pre.%s.txt" % self.tgt),
            self.p("pre.dev.txt"),
            self.p("initial.records.tsv"),
        ]
        records_path = self.p("bt.records.tsv")
        outputs = [records_path]
        for it in range(1, iterations + 1):
            direction = ("%s2%s" % (self.tgt, self.src)) if it % 2 == 1 else a2b
            outputs.append(self.p("bt%d.%s.moses" % (it, direction)))
            outputs.append(self.p("bt%d.%s.weights.txt" % (it, direction)))

        def fn():
            initial = self.load_system("initial.%s" % a2b, a2b, 0, "initial")
            mono = {
                self.src: read_corpus(self.p("pre.%s.txt" % self.src)),
                self.tgt: read_corpus(self.p("pre.%s.txt" % self.tgt)),
            }
            heldout_n = int(self.cfg.get("tune", "synthetic_dev_size"))
            synth_mode = str(self.cfg.get("tune", "mode")) == "synthetic"
            heldouts = {}
            if synth_mode:
                for lang in mono:
                    heldouts[lang] = mono[lang][-heldout_n:]
                    mono[lang] = mono[lang][:-heldout_n]
            lms = {
                self.src: read_arpa(self.p("lm.%s.arpa" % self.src)),
                self.tgt: read_arpa(self.p("lm.%s.arpa" % self.tgt)),
            }
            devs = {
                a2b: self._oriented_dev(a2b),
                "%s2%s" % (self.tgt, self.src): self._oriented_dev("%s2%s" % (self.tgt, self.src)),
            }

            initial_rows = self._read_records(self.p("initial.records.tsv"))
            initial_records = [
                IterationRecord(0, row["direction"], 0, float(row["dev_bleu"]), None)
                for row in initial_rows
            ]

            current = initial
            records: list[IterationRecord] = []
            last_bleu = {r.direction: r.dev_bleu for r in initial_records}
            consecutive_drops = 0
            for it in range(1, iterations + 1):
                src_lang = current.direction.split("2")[0]
                subset = backtrans.subsample(mono[src_lang], bt_cfg.subset_size, bt_cfg.seed + it)
                new_direction = backtrans.reverse_direction(current.direction)
                if synth_mode:
                    dev = backtrans.make_synthetic_dev(current, heldouts[src_lang], bt_cfg.beam_size)
                else:
                    dev = devs[new_direction]
                rec = backtrans.run_bt_iteration(
                    current, subset, lms[src_lang], dev, bt_cfg, iteration=it
                )
                # selection metric stays comparable: authentic-dev BLEU
                authentic_bleu = backtrans.dev_bleu(rec.snapshot, devs[new_direction], bt_cfg.beam_size)
                rec = IterationRecord(
                    rec.iteration, rec.direction, rec.synthetic_size, authentic_bleu, rec.snapshot, rec.fallback_lines
                )
                records.append(rec)
                name = "bt%d.%s" % (it, rec.direction)
                write_moses(rec.snapshot.table, self.p("%s.moses" % name))
                rec.snapshot.weights.save(self.p("%s.weights.txt" % name))
                prev = last_bleu.get(rec.direction)
                if prev is not None and rec.dev_bleu < prev - bt_cfg.divergence_delta:
                    consecutive_drops += 1
                    if consecutive_drops >= 2:
                        log.warning("divergence guard tripped at iteration %d", it)
                        break
                else:
                    consecutive_drops = 0
                last_bleu[rec.direction] = rec.dev_bleu
                current = rec.snapshot
            rows = []
            for rec in records:
                rows.append(
                    {
                        "name": "bt%d.%s" % (rec.iteration, rec.direction),
                        "iteration": rec.iteration,
                        "direction": rec.direction,
                        "size": rec.synthetic_size,
                        "dev_bleu": repr(rec.dev_bleu),
                        "provenance": rec.snapshot.provenance,
                        "distortion_limit": rec.snapshot.distortion_limit,
                    }
                )
            self._write_records(records_path, rows)
            # guard may stop early: declare only the files actually written
            del outputs[1:]
            for rec in records:
                outputs.append(self.p("bt%d.%s.moses" % (rec.iteration, rec.direction)))
                outputs.append(self.p("bt%d.%s.weights.txt" % (rec.iteration, rec.direction)))
            return {"iterations": len(records)}

        self._stage(
            "backtranslate",
            self.cfg.stage_dict("backtrans", "tune", "decode", "global"),
            inputs,
            outputs,
            fn,
        )

    def stage_select(self) -> StageRecord:
        export = str(self.cfg.get("global", "export_direction"))
        direction = export if export else "%s2%s" % (self.tgt, self.src)
        inputs = [self.p("initial.records.tsv"), self.p("bt.records.tsv")]
        out = self.p("selected.tsv")

        def fn():
            rows = self._read_records(inputs[0]) + self._read_records(inputs[1])
            rows = [r for r in rows if r["direction"] == direction]
            if not rows:
                raise ValueError("no candidate systems for direction %r" % direction)
            best = rows[0]
            for row in rows[1:]:
                if float(row["dev_bleu"]) > float(best["dev_bleu"]):
                    best = row
            self._write_records(out, [best])
            return {"chosen": best["name"], "dev_bleu": best["dev_bleu"]}

        return self._stage("select", {"direction": direction}, inputs, [out], fn)

    def _selected_system(self) -> SystemSnapshot:
        row = self._read_records(self.p("selected.tsv"))[0]
        return self.load_system(
            row["name"], row["direction"], int(row["distortion_limit"]), row["provenance"]
        )

    def stage_translate(self) -> None:
        out = self.p("synth.initial.txt")
        inputs = [self.p("selected.tsv")]

        def fn():
            system = self._selected_system()
            src_lang = system.direction.split("2")[0]
            corpus = read_corpus(self.p("pre.%s.txt" % src_lang))
            run = backtrans.translate_full_corpus(
                system, corpus, out, chunk_size=1000, beam_size=self._decode_params().beam_size
            )
            return {"lines": run.lines, "fallbacks": run.fallback_lines}

        self._stage("translate", self.cfg.stage_dict("decode"), inputs, [out], fn)

    def stage_fix(self) -> None:
        fix = self.cfg["fix"]
        # strip untranslated source-alphabet words from the synthetic side
        strip_in, strip_out = self.p("synth.initial.txt"), self.p("synth.noczech.txt")

        def strip_fn():
            bt = read_bitext(strip_in)
            if bool(fix["strip"]):
                profile = synthfix.DiacriticProfile.czech()
                result = synthfix.strip_untranslated(bt, profile, str(fix["unk_token"]))
                write_bitext(result.bitext, strip_out)
                return {"replaced": result.replaced}
            write_bitext(bt, strip_out)
            return {"replaced": 0}

        self._stage("fix.strip", self.cfg.stage_dict("fix"), [strip_in], [strip_out], strip_fn)

        reorder_out = self.p("synth.reordered.txt")

        def reorder_fn():
            bt = read_bitext(strip_out)
            shuffled = synthfix.reorder_augment(bt.src, int(fix["reorder_window"]), self.seed)
            doubled_tgt = [
                Sentence(s.tokens, i) for i, s in enumerate(list(bt.tgt) + list(bt.tgt))
            ]
            doubled_src = [Sentence(s.tokens, i) for i, s in enumerate(shuffled)]
            write_bitext(Bitext(doubled_src, doubled_tgt), reorder_out)
            return {"pairs": len(doubled_src)}

        self._stage(
            "fix.reorder",
            self.cfg.stage_dict("fix", "global"),
            [strip_out],
            [reorder_out],
            reorder_fn,
        )

        ner_out = self.p("synth.ner.txt")

        def ner_fn():
            bt = read_bitext(reorder_out)
            # NEs live on the authentic side; the synthetic side gets repaired
            flipped = Bitext(bt.tgt, bt.src)
            spans = [
                span
                for idx, sent in enumerate(flipped.src)
                for span in synthfix.tag_nes_default(Sentence(sent.tokens, idx))
            ]
            model_fwd = aligner.train_fastalign(flipped, int(self.cfg.get("backtrans", "em_iterations")))
            model_rev = aligner.train_fastalign(
                Bitext(flipped.tgt, flipped.src), int(self.cfg.get("backtrans", "em_iterations"))
            )
            fwd = aligner.align_bitext(model_fwd, flipped)
            rev = [
                a.transposed()
                for a in aligner.align_bitext(model_rev, Bitext(flipped.tgt, flipped.src))
            ]
            # intersection favours precision, which NE copying needs
            merged = [aligner.symmetrize(f, r, "intersection") for f, r in zip(fwd, rev)]
            result = synthfix.ne_pretreat(
                flipped,
                spans,
                merged,
                synthfix.default_policy(),
                float(fix["lev_threshold"]),
                str(fix["unk_token"]),
            )
            write_bitext(Bitext(result.bitext.tgt, result.bitext.src), ner_out)
            return {
                "spans": len(spans),
                "trusted": result.stats.trusted,
                "copied": result.stats.copied,
                "removed": result.stats.removed,
            }

        self._stage("fix.ner", self.cfg.stage_dict("fix", "backtrans"), [reorder_out], [ner_out], ner_fn)

    def stage_evaluate(self) -> StageRecord:
        inputs = [self.p("selected.tsv"), self.p("pre.test.txt")]
        out = self.p("report.txt")

        def fn():
            system = self._selected_system()
            test = read_bitext(self.p("pre.test.txt"))
            oriented = (
                test
                if system.direction == "%s2%s" % (self.src, self.tgt)
                else Bitext(test.tgt, test.src)
            )
            hyps, fallbacks = backtrans.translate_corpus(
                system, oriented.src, self._decode_params().beam_size
            )
            metrics = {}
            if bool(self.cfg.get("fix", "quotes")):
                hyps, odd = synthfix.normalize_quotes_corpus(hyps)
                metrics["odd_quotes"] = odd
            report = corpus_bleu(
                [h.tokens for h in hyps], [r.tokens for r in oriented.tgt], cased=False
            )
            metrics.update({"bleu": repr(report.bleu), "fallbacks": fallbacks})
            accuracy = None
            map_path = self.p("cipher_map.tsv")
            if map_path.exists():
                accuracy = cipher.token_accuracy(
                    [h.tokens for h in hyps], [r.tokens for r in oriented.tgt]
                )
                metrics["token_accuracy"] = repr(accuracy)
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(report.format() + "\n")
                fh.write("TER, BEER and CharacTER are not computed by this toolkit.\n")
                if accuracy is not None:
                    fh.write("token decipherment accuracy = %s\n" % repr(accuracy))
            return metrics

        return self._stage("evaluate", self.cfg.stage_dict("decode", "fix"), inputs, [out], fn)

    # ---- entry point ----------------------------------------------------

    def run(self) -> PipelineManifest:
        self.stage_data()
        self.stage_preprocess()
        self.stage_vocab_and_embed()
        self.stage_map()
        self.stage_tables()
        self.stage_lms()
        self.stage_initial_systems()
        self.stage_backtranslate()
        self.stage_select()
        self.stage_translate()
        self.stage_fix()
        self.stage_evaluate()
        return self.manifest


def run_pipeline(config: PipelineConfig, workspace: str | Path, resume: bool = True) -> PipelineManifest:
    return Pipeline(config, workspace, resume).run()
