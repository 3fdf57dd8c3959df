"""Back-off word scoring, text scoring and batch identification."""

import math
import random

import pytest

from conftest import labeled, random_text, random_toy, unlabeled
from lidkit.errors import TrainingError
from lidkit.models import expand_backoff, parse_kind, train
from lidkit.scorer import (Identification, ScoreCounters, identify_batch,
                           score_text, score_word, token_items)


def kinds(*descs: str):
    return tuple(parse_kind(d) for d in descs)


def toy(backoff: str, n_max: int, pairs, languages=("A", "B"), p_mod=1.1):
    return train(labeled(pairs), languages, p_mod,
                 expand_backoff(backoff, n_max))


class TestWordScoring:
    def test_word_model_hit(self):
        # A words: kissa x2, koira x1 (total 3); B words: hund, katze
        ms = toy("word:lower", 0, [("kissa koira kissa", "A"),
                                   ("hund katze", "B")])
        vec = score_word(ms, "kissa")
        assert vec["A"] == math.log10(3) - math.log10(2)
        assert vec["B"] == math.log10(2) * 1.1  # penalty: B never saw it

    def test_char_backoff_after_word_miss(self):
        # "ab" is not a trained word, so the word model is skipped; of its
        # two trigrams only " ab" (from A's "abc") is in the union domain,
        # "ab " is discarded, so the mean runs over one retained trigram
        ms = toy("word:lower+chars:lower", 3, [("abc", "A"), ("hund", "B")])
        counters = ScoreCounters()
        got = identify_batch(ms, unlabeled(["ab"]), counters)[0]
        assert got.scores["A"] == math.log10(3)           # c=1, l=3 trigrams
        assert got.scores["B"] == math.log10(4) * 1.1     # penalty, l=4
        assert got.best == "A"
        assert counters.kind_words == {"char3:lower": 1}
        assert counters.word_model_words == 0

    def test_all_ngrams_discarded_falls_to_next_size(self):
        # no bigram of "xyz" was ever trained, so char2 is skipped (not
        # penalized) and char1 scores the word on its padding spaces alone
        ms = toy("chars:lower", 2, [("abc", "A"), ("hund", "B")])
        counters = ScoreCounters()
        got = identify_batch(ms, unlabeled(["xyz"]), counters)[0]
        assert got.scores["A"] == math.log10(5) - math.log10(2)
        assert got.scores["B"] == math.log10(6) - math.log10(2)
        assert counters.kind_words == {"char1:lower": 1}

    def test_unscorable_word(self):
        ms = toy("char2:lower", 0, [("abc", "A"), ("hund", "B")])
        assert score_word(ms, "xyz") is None

    def test_short_word_scored_by_wide_grams_up_to_len_plus_two(self):
        # " a " is a trigram, so a length-1 word can be scored at n=3
        ms = toy("char3:lower", 0, [("aa a", "A"), ("bb", "B")])
        vec = score_word(ms, "a")
        # A char3 grams: " aa", "aa ", " a " (total 3)
        assert vec["A"] == math.log10(3)
        assert vec["B"] == math.log10(2) * 1.1

    def test_word_too_short_for_every_kind(self):
        # n=4 exceeds len("a") + 2, so the kind is skipped entirely
        ms = toy("char4:lower", 0, [("aaa", "A"), ("bbb", "B")])
        assert score_word(ms, "a") is None

    def test_scheme_lowercases_before_lookup(self):
        ms = toy("word:lower", 0, [("kissa", "A"), ("hund", "B")])
        assert score_word(ms, "KISSA") == score_word(ms, "kissa")

    def test_orig_scheme_is_case_sensitive(self):
        ms = toy("word:orig", 0, [("Kissa", "A"), ("hund", "B")])
        assert score_word(ms, "kissa") is None
        assert score_word(ms, "Kissa") is not None

    def test_rejects_empty_word(self):
        ms = toy("word:lower", 0, [("aa", "A"), ("bb", "B")])
        with pytest.raises(ValueError):
            score_word(ms, "")

    def test_consulting_untrained_language_raises(self):
        # B has no char5 counts at all; touching the kind must fail loudly
        # rather than emit an arbitrary score
        ms = toy("char5:lower", 0, [("abcdef", "A"), ("ab", "B")])
        with pytest.raises(TrainingError, match="no counts"):
            score_word(ms, "abcdef")

    def test_larger_p_mod_raises_only_penalties(self):
        pairs = [("kissa koira", "A"), ("hund katze", "B")]
        mild = toy("word:lower", 0, pairs, p_mod=1.0)
        harsh = toy("word:lower", 0, pairs, p_mod=1.3)
        assert harsh.p_mod > mild.p_mod
        v_mild, v_harsh = score_word(mild, "kissa"), score_word(harsh, "kissa")
        assert v_harsh["B"] > v_mild["B"]
        assert v_harsh["A"] == v_mild["A"]


class TestTextScoring:
    def test_mean_over_word_multiplicities(self):
        ms = toy("word:lower", 0, [("kissa koira kissa", "A"),
                                   ("hund katze", "B")])
        k, h = score_word(ms, "kissa"), score_word(ms, "hund")
        got = score_text(ms, "kissa kissa hund")
        assert got.word_count == 3
        for lang in ("A", "B"):
            assert got.scores[lang] == (2 * k[lang] + h[lang]) / 3

    def test_duplicated_text_scores_identically(self):
        ms = toy("word:lower+chars:lower", 2,
                 [("kissa koira", "A"), ("hund", "B")])
        assert score_text(ms, "kissa").scores == \
               score_text(ms, "kissa kissa").scores

    def test_unscorable_words_are_excluded_from_the_mean(self):
        ms = toy("char2:lower", 0, [("abc", "A"), ("hund", "B")])
        with_junk = score_text(ms, "abc xyz abc")
        without = score_text(ms, "abc abc")
        assert with_junk.word_count == 2
        assert with_junk.scores == without.scores

    def test_degenerate_no_tokens(self):
        ms = toy("word:lower", 0, [("aa", "A"), ("bb", "B")])
        for text in ("", "123 !!", "   "):
            got = score_text(ms, text)
            assert got.degenerate
            assert got.word_count == 0
            assert got.scores == {"A": 0.0, "B": 0.0}
            assert got.ranking == ("A", "B")

    def test_degenerate_all_words_unscorable(self):
        ms = toy("char2:lower", 0, [("abc", "A"), ("hund", "B")])
        got = score_text(ms, "xyz zzz")
        assert got.degenerate and got.ranking == ("A", "B")

    def test_tie_breaks_by_configuration_order(self):
        # identical training for both languages: every score ties
        pairs = [("aa ab", "A"), ("aa ab", "B")]
        forward = toy("word:lower+chars:lower", 2, pairs)
        backward = train(labeled(pairs), ("B", "A"), 1.1,
                         expand_backoff("word:lower+chars:lower", 2))
        assert score_text(forward, "aa ab").ranking == ("A", "B")
        assert score_text(backward, "aa ab").ranking == ("B", "A")

    def test_ranking_sorts_by_score(self):
        rng = random.Random(4001)
        for _ in range(25):
            _, ms, _ = random_toy(rng)
            got = score_text(ms, random_text(rng))
            ordered = [got.scores[lang] for lang in got.ranking]
            assert ordered == sorted(ordered)
            assert set(got.ranking) == set(ms.languages)

    def test_word_order_invariance(self):
        rng = random.Random(4007)
        for _ in range(25):
            _, ms, _ = random_toy(rng)
            words = [random_text(rng) for _ in range(3)]
            a = score_text(ms, " ".join(words))
            rng.shuffle(words)
            b = score_text(ms, " ".join(words))
            assert a.word_count == b.word_count
            for lang in ms.languages:
                assert a.scores[lang] == pytest.approx(b.scores[lang],
                                                       abs=1e-12)

    def test_scores_lie_within_value_bounds(self):
        # every word value is a count value or a penalty, so text scores
        # stay within [0, max over kinds of log10(total) * p_mod]
        rng = random.Random(4013)
        for _ in range(25):
            _, ms, _ = random_toy(rng)
            bound = max(math.log10(ms.total(lang, kind)) * ms.p_mod
                        for kind in ms.backoff_order
                        for lang in ms.languages
                        if ms.total(lang, kind) > 0)
            got = score_text(ms, random_text(rng))
            if got.degenerate:
                continue
            for v in got.scores.values():
                assert 0.0 <= v <= bound + 1e-12


class TestBatch:
    def test_batch_equals_per_text_scoring(self):
        rng = random.Random(4019)
        for _ in range(15):
            _, ms, _ = random_toy(rng)
            texts = [random_text(rng) for _ in range(8)] + ["", "zzz xyz"]
            batch = identify_batch(ms, unlabeled(texts))
            for text, got in zip(texts, batch):
                one = score_text(ms, text)
                assert got.scores == one.scores
                assert got.ranking == one.ranking
                assert got.word_count == one.word_count
                assert got.degenerate == one.degenerate

    def test_counters_count_distinct_words(self):
        ms = toy("word:lower+chars:lower", 2,
                 [("kissa koira", "A"), ("hund", "B")])
        counters = ScoreCounters()
        identify_batch(ms, unlabeled(["kissa kissa hund", "kissa xqz"]),
                       counters)
        # kissa and hund hit the word model once each despite repeats;
        # xqz shares no trained bigram but its padding spaces are char1
        # features, so char1 catches it
        assert counters.word_model_words == 2
        assert counters.kind_words == {"word:lower": 2, "char1:lower": 1}
        assert counters.dropped_words == 0

    def test_counters_count_dropped_words(self):
        ms = toy("char2:lower", 0, [("abc", "A"), ("hund", "B")])
        counters = ScoreCounters()
        identify_batch(ms, unlabeled(["abc xyz", "xyz zzz abc"]), counters)
        assert counters.kind_words == {"char2:lower": 1}
        assert counters.dropped_words == 2

    def test_best_and_second(self):
        ms = toy("word:lower", 0, [("kissa", "A"), ("hund", "B")])
        got = score_text(ms, "kissa")
        assert got.best == "A" and got.second == "B"


class TestTokenItems:
    def test_first_occurrence_order_with_multiplicities(self):
        assert token_items("b a b c a b") == [("b", 3), ("a", 2), ("c", 1)]

    def test_empty(self):
        assert token_items("") == []
