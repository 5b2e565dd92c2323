import math
import random
from collections import Counter

import pytest

from umtx.aligner import Alignment
from umtx.corpus import Bitext, Sentence, sentence
from umtx.synthfix import (
    NE_TYPES,
    CZECH_QUOTES,
    DiacriticProfile,
    Gazetteer,
    NEPolicy,
    NESpan,
    default_policy,
    levenshtein,
    ne_posttreat,
    ne_pretreat,
    normalize_quotes,
    normalize_quotes_corpus,
    read_ne_spans,
    reorder_augment,
    replay_edits,
    split_by_ne_presence,
    strip_untranslated,
    surface_distance,
    tag_nes_default,
    write_ne_spans,
)


class TestStripUntranslated:
    def test_paper_style_example(self):
        bt = Bitext.from_pairs([(["na", "pískovém", "pobřeží"], ["auf", "písčitém", "Küste"])])
        result = strip_untranslated(bt, DiacriticProfile.czech())
        assert result.bitext.tgt[0].tokens == ("auf", "unk", "Küste")
        assert result.replaced == 1
        # source side untouched
        assert result.bitext.src[0].tokens == bt.src[0].tokens

    def test_clean_target_unchanged(self):
        bt = Bitext.from_pairs([(["x"], ["ganz", "normal"])])
        result = strip_untranslated(bt, DiacriticProfile.czech())
        assert result.bitext.tgt[0].tokens == ("ganz", "normal")
        assert result.replaced == 0

    def test_all_profile_token(self):
        bt = Bitext.from_pairs([(["x"], ["čaj"])])
        result = strip_untranslated(bt, DiacriticProfile.czech())
        assert result.bitext.tgt[0].tokens == ("unk",)

    def test_token_count_preserved_and_log_replays(self):
        rng = random.Random(3)
        czech = "aáeěsš"
        pairs = []
        for _ in range(30):
            tgt = ["".join(rng.choice(czech) for _ in range(4)) for _ in range(rng.randrange(1, 8))]
            pairs.append((["s"], tgt))
        bt = Bitext.from_pairs(pairs)
        result = strip_untranslated(bt, DiacriticProfile.czech())
        for before, after in zip(bt.tgt, result.bitext.tgt):
            assert len(before) == len(after)
        replayed = replay_edits(bt, result.edits)
        assert [s.tokens for s in replayed.tgt] == [s.tokens for s in result.bitext.tgt]

    def test_profile_disjointness_enforced(self):
        with pytest.raises(ValueError):
            DiacriticProfile.czech(exclude_target="áxyz")


class TestReorderAugment:
    def test_doubles_and_copies(self):
        corpus = [sentence("a b c d e f g", i) for i in range(4)]
        out = reorder_augment(corpus, window=3, seed=5)
        assert len(out) == 8
        verbatim = sum(1 for i, s in enumerate(out) if s.tokens == corpus[i % 4].tokens)
        assert verbatim >= 4  # the two untouched parities, plus chance identities

    def test_parity_structure(self):
        corpus = [sentence(" ".join("t%d" % k for k in range(10)), i) for i in range(6)]
        out = reorder_augment(corpus, window=5, seed=1)
        # pass 1 copies even-indexed inputs verbatim, pass 2 odd-indexed
        for i in range(0, 6, 2):
            assert out[i].tokens == corpus[i].tokens
        for i in range(1, 6, 2):
            assert out[6 + i].tokens == corpus[i].tokens

    def test_multiset_and_displacement_property(self):
        rng = random.Random(7)
        window = 5
        corpus = [
            Sentence(tuple("w%d.%d" % (i, k) for k in range(rng.randrange(1, 30))), i)
            for i in range(200)
        ]
        out = reorder_augment(corpus, window=window, seed=11)
        assert len(out) == 2 * len(corpus)
        for half in (out[: len(corpus)], out[len(corpus) :]):
            for orig, got in zip(corpus, half):
                assert Counter(got.tokens) == Counter(orig.tokens)
                # tokens are unique within a sentence: displacement is testable
                pos = {tok: p for p, tok in enumerate(orig.tokens)}
                for p, tok in enumerate(got.tokens):
                    assert abs(p - pos[tok]) < window

    def test_window_one_is_pure_doubling(self):
        corpus = [sentence("a b c", i) for i in range(3)]
        out = reorder_augment(corpus, window=1, seed=9)
        assert [s.tokens for s in out] == [s.tokens for s in corpus + corpus]

    def test_seed_reproducible(self):
        corpus = [sentence("a b c d e f", i) for i in range(10)]
        a = reorder_augment(corpus, 3, seed=42)
        b = reorder_augment(corpus, 3, seed=42)
        assert [s.tokens for s in a] == [s.tokens for s in b]


class TestLevenshtein:
    def test_basics(self):
        assert levenshtein("", "abc") == 3
        assert levenshtein("kitten", "sitting") == 3
        assert levenshtein("abc", "abc") == 0

    def test_surface_distance_folds_case_and_diacritics(self):
        assert surface_distance("Ludvík", "ludvik") == 0
        assert surface_distance("Brno", "BRNO") == 0
        assert surface_distance("Ludvík", "Harold") > 3


def _policy():
    return default_policy()


class TestNePretreat:
    def test_trusted_translation_unchanged(self):
        bt = Bitext.from_pairs([(["Brno", "je"], ["Brno", "ist"])])
        spans = [NESpan(0, 0, 1, "geographical", "Brno")]
        aln = [Alignment(frozenset({(0, 0), (1, 1)}))]
        result = ne_pretreat(bt, spans, aln, _policy())
        assert result.bitext.tgt[0].tokens == ("Brno", "ist")
        assert result.stats.trusted == 1

    def test_personal_name_copied(self):
        # "king Ludvik translated as king Harold" gets the source name back
        bt = Bitext.from_pairs([(["král", "Ludvík"], ["king", "Harold"])])
        spans = [NESpan(0, 1, 2, "personal", "Ludvík")]
        aln = [Alignment(frozenset({(0, 0), (1, 1)}))]
        result = ne_pretreat(bt, spans, aln, _policy())
        assert result.bitext.tgt[0].tokens == ("king", "Ludvík")
        assert result.stats.copied == 1

    def test_geographical_removed(self):
        # "Brno translated as Kraluv Dvur" is struck out, not copied
        bt = Bitext.from_pairs([(["Brno", "x"], ["Kraluv", "Dvur", "y"])])
        spans = [NESpan(0, 0, 1, "geographical", "Brno")]
        aln = [Alignment(frozenset({(0, 0), (0, 1), (1, 2)}))]
        result = ne_pretreat(bt, spans, aln, _policy())
        assert result.bitext.tgt[0].tokens == ("unk", "y")
        assert result.stats.removed == 1

    def test_unaligned_span_skipped(self):
        bt = Bitext.from_pairs([(["Ludvík"], ["Harold"])])
        spans = [NESpan(0, 0, 1, "personal", "Ludvík")]
        result = ne_pretreat(bt, spans, [Alignment(frozenset())], _policy())
        assert result.bitext.tgt[0].tokens == ("Harold",)
        assert result.stats.skipped_unaligned == 1

    def test_infinite_threshold_is_identity(self):
        rng = random.Random(13)
        pairs = []
        spans = []
        alns = []
        for i in range(20):
            src = ["S%d" % rng.randrange(9) for _ in range(rng.randrange(2, 6))]
            tgt = ["T%d" % rng.randrange(9) for _ in range(rng.randrange(2, 6))]
            pairs.append((src, tgt))
            spans.append(NESpan(i, 0, 1, rng.choice(NE_TYPES), src[0]))
            alns.append(Alignment(frozenset({(0, rng.randrange(len(tgt)))})))
        bt = Bitext.from_pairs(pairs)
        result = ne_pretreat(bt, spans, alns, _policy(), lev_threshold=math.inf)
        assert [s.tokens for s in result.bitext.tgt] == [s.tokens for s in bt.tgt]
        assert result.edits == []

    def test_edit_log_replays(self):
        bt = Bitext.from_pairs(
            [
                (["Ludvík", "a", "Brno"], ["Harold", "und", "Kraluv", "Dvur"]),
                (["Praha"], ["Paris"]),
            ]
        )
        spans = [
            NESpan(0, 0, 1, "personal", "Ludvík"),
            NESpan(0, 2, 3, "geographical", "Brno"),
            NESpan(1, 0, 1, "geographical", "Praha"),
        ]
        alns = [
            Alignment(frozenset({(0, 0), (1, 1), (2, 2), (2, 3)})),
            Alignment(frozenset({(0, 0)})),
        ]
        result = ne_pretreat(bt, spans, alns, _policy())
        assert result.bitext.tgt[0].tokens == ("Ludvík", "und", "unk")
        assert result.bitext.tgt[1].tokens == ("unk",)
        replayed = replay_edits(bt, result.edits)
        assert [s.tokens for s in replayed.tgt] == [s.tokens for s in result.bitext.tgt]

    def test_overlapping_hulls_flagged(self):
        bt = Bitext.from_pairs([(["Anna", "Marie"], ["X", "Y"])])
        spans = [
            NESpan(0, 0, 1, "personal", "Anna"),
            NESpan(0, 1, 2, "personal", "Marie"),
        ]
        aln = [Alignment(frozenset({(0, 0), (0, 1), (1, 0), (1, 1)}))]
        result = ne_pretreat(bt, spans, aln, _policy())
        assert result.stats.overlapping_hulls


class TestNePosttreat:
    def test_table4_style_repair(self):
        src = sentence("Der Lyriker Werner Söllner ist IM Walter .")
        hyp = sentence("Prozaik Filip Söllner je agentem StB Ladislavem Bártou .")
        spans = [NESpan(0, 1, 3, "personal", "Filip Söllner")]
        aln = Alignment(frozenset({(1, 0), (2, 1), (3, 2), (4, 3)}))
        result = ne_posttreat(src, hyp, aln, spans, _policy())
        assert result.sentence.tokens[:3] == ("Prozaik", "Werner", "Söllner")
        assert result.stats.copied == 1

    def test_known_failure_mode_copy_performed(self):
        # wrong alignment copies the source place name over a correct target
        src = sentence("aus Norwegen")
        hyp = sentence("z Norska")
        spans = [NESpan(0, 1, 2, "geographical", "Norska")]
        aln = Alignment(frozenset({(1, 1)}))
        result = ne_posttreat(src, hyp, aln, spans, _policy())
        assert result.sentence.tokens == ("z", "Norwegen")

    def test_overlap_duplication_flagged(self):
        # both spans pull from the same source hull ("Miss Miss" pattern)
        src = sentence("Miss Japan gewinnt")
        hyp = sentence("Miss Japonsko vyhrála")
        spans = [
            NESpan(0, 0, 1, "personal", "Miss"),
            NESpan(0, 1, 2, "geographical", "Japonsko"),
        ]
        aln = Alignment(frozenset({(0, 0), (0, 1)}))
        result = ne_posttreat(src, hyp, aln, spans, _policy())
        assert result.stats.overlapping_hulls
        assert result.sentence.tokens[:2] == ("Miss", "Miss")

    def test_all_ignore_policy_is_identity(self):
        policy = NEPolicy({t: "ignore" for t in NE_TYPES}, {t: "ignore" for t in NE_TYPES})
        src = sentence("a b c")
        hyp = sentence("X y Z")
        spans = tag_nes_default(hyp)
        result = ne_posttreat(src, hyp, Alignment(frozenset({(0, 0)})), spans, policy)
        assert result.sentence.tokens == hyp.tokens
        assert result.edits == []

    def test_empty_hull_untouched_and_counted(self):
        src = sentence("quelle")
        hyp = sentence("cible Nom")
        spans = [NESpan(0, 1, 2, "personal", "Nom")]
        result = ne_posttreat(src, hyp, Alignment(frozenset()), spans, _policy())
        assert result.sentence.tokens == hyp.tokens
        assert result.stats.skipped_unaligned == 1


class TestDefaultTagger:
    def test_digit_rule(self):
        spans = tag_nes_default(sentence("roku 1989"))
        assert spans == [NESpan(0, 1, 2, "number", "1989")]

    def test_gazetteer_hit(self):
        gaz = Gazetteer({"geographical": frozenset({"Brno"})})
        spans = tag_nes_default(sentence("bydlel v Brno"), gaz)
        assert spans == [NESpan(0, 2, 3, "geographical", "Brno")]

    def test_sentence_initial_capital_not_tagged(self):
        assert tag_nes_default(sentence("Dnes je hezky")) == []

    def test_mid_sentence_capital_defaults_personal(self):
        spans = tag_nes_default(sentence("pan Novak prisel"))
        assert spans == [NESpan(0, 1, 2, "personal", "Novak")]

    def test_span_tsv_round_trip(self, tmp_path):
        spans = [NESpan(3, 1, 4, "media", "Mlada fronta Dnes"), NESpan(5, 0, 1, "time", "zitra")]
        path = tmp_path / "spans.tsv"
        write_ne_spans(spans, path)
        assert read_ne_spans(path) == spans

    def test_policy_round_trip_and_totality(self, tmp_path):
        policy = default_policy()
        path = tmp_path / "policy.tsv"
        policy.save(path)
        loaded = NEPolicy.load(path)
        assert loaded.pre == policy.pre and loaded.post == policy.post
        with pytest.raises(ValueError):
            NEPolicy({t: "copy" for t in NE_TYPES[:-1]}, {t: "copy" for t in NE_TYPES})


class TestQuotes:
    def test_simple_pair(self):
        got = normalize_quotes(sentence('" x "'))
        assert got.tokens == ("„", "x", "“")

    def test_no_quotes_unchanged(self):
        s = sentence("nic tu neni")
        assert normalize_quotes(s) is s

    def test_two_quoted_segments_alternate(self):
        got = normalize_quotes(sentence('" a " b " c "'))
        assert got.tokens == ("„", "a", "“", "b", "„", "c", "“")

    def test_odd_count_last_closes(self):
        got = normalize_quotes(sentence('" a " b "'))
        assert got.tokens == ("„", "a", "“", "b", "“")

    def test_existing_directional_preserved(self):
        s = sentence("„ x “")
        assert normalize_quotes(s).tokens == s.tokens

    def test_corpus_counts_odd(self):
        corpus = [sentence('" a "'), sentence('" b'), sentence("c")]
        out, odd = normalize_quotes_corpus(corpus)
        assert odd == 1
        assert len(out) == 3


class TestSplitByNe:
    def test_partitions(self):
        corpus = [sentence("a 1"), sentence("b", 1), sentence("c 2", 2)]
        spans = [s for sent in corpus for s in tag_nes_default(sent)]
        assert spans == [NESpan(0, 1, 2, "number", "1"), NESpan(2, 1, 2, "number", "2")]
        with_ne, without = split_by_ne_presence(corpus, spans)
        assert with_ne == [0, 2]
        assert without == [1]
        assert sorted(with_ne + without) == [0, 1, 2]

    def test_all_and_none(self):
        corpus = [sentence("1"), sentence("2")]
        spans = [NESpan(0, 0, 1, "number", "1"), NESpan(1, 0, 1, "number", "2")]
        assert split_by_ne_presence(corpus, spans) == ([0, 1], [])
        assert split_by_ne_presence(corpus, []) == ([], [0, 1])
