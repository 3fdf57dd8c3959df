"""Confidence-ranked adaptation: rounds, thresholds, epochs."""

import math
import random
from collections import Counter

import pytest

from conftest import labeled, random_text, random_toy, unlabeled
from lidkit.adapt import (AdaptPlan, AdaptState, adapt_epoch, adapt_iterative,
                          fixed_point_detect)
from lidkit.confidence import ConfidenceMeasure, confidence
from lidkit.errors import ConfigError
from lidkit.models import expand_backoff, save, train
from lidkit.scorer import identify_batch


def model_bytes(ms, tmp_path) -> bytes:
    path = tmp_path / "snapshot.model"
    save(ms, str(path))
    return path.read_bytes()


TRAIN_PAIRS = [("aa ab ba aab", "A"), ("dd de ed dde", "B")]


def fresh_model():
    return train(labeled(TRAIN_PAIRS), ("A", "B"), 1.1,
                 expand_backoff("word:lower+chars:lower", 2))


def collection(seed: int, n: int):
    rng = random.Random(seed)
    texts = []
    for i in range(n):
        alphabet = "ab" if i % 2 == 0 else "de"
        words = ["".join(rng.choice(alphabet) for _ in range(rng.randint(1, 3)))
                 for _ in range(rng.randint(1, 4))]
        texts.append(" ".join(words))
    return unlabeled(texts)


def oracle_chunk_sizes(n: int, k: int) -> list[int]:
    k = min(k, n)
    sizes, remaining = [], n
    for r in range(k):
        c = math.ceil(remaining / (k - r))
        sizes.append(c)
        remaining -= c
    return sizes


class TestPlanValidation:
    def test_defaults(self):
        plan = AdaptPlan()
        assert plan.k == 1 and plan.epochs == 1
        assert plan.measure is ConfidenceMeasure.BS
        assert plan.threshold is None and plan.epoch_mode == "replace"

    @pytest.mark.parametrize("kwargs", [
        {"k": 0}, {"k": -3}, {"epochs": 0}, {"threshold": -0.1},
        {"threshold": float("nan")}, {"epoch_mode": "bogus"},
    ])
    def test_rejects_bad_parameters(self, kwargs):
        with pytest.raises(ConfigError):
            AdaptPlan(**kwargs)

    def test_threshold_zero_is_allowed(self):
        assert AdaptPlan(threshold=0.0).threshold == 0.0


class TestEpoch:
    def test_commit_sizes_ceil_first(self):
        ms = fresh_model()
        state = adapt_epoch(ms, collection(11, 10), AdaptPlan(k=4))
        per_round = Counter(e.round for e in state.round_log)
        assert [per_round[r] for r in range(4)] == [3, 3, 2, 2]
        assert oracle_chunk_sizes(10, 4) == [3, 3, 2, 2]

    def test_round_sizes_match_oracle(self):
        rng = random.Random(6007)
        for _ in range(20):
            ms = fresh_model()
            n = rng.randint(1, 12)
            k = rng.randint(1, 15)
            state = adapt_epoch(ms, collection(rng.randint(0, 10**6), n),
                                AdaptPlan(k=k))
            per_round = Counter(e.round for e in state.round_log)
            sizes = oracle_chunk_sizes(n, k)
            assert [per_round[r] for r in range(len(sizes))] == sizes
            assert state.q == min(k, n)

    def test_every_instance_finalized_exactly_once(self):
        ms = fresh_model()
        coll = collection(13, 9)
        state = adapt_epoch(ms, coll, AdaptPlan(k=3))
        assert sorted(e.index for e in state.round_log) == list(range(9))
        assert set(state.finalized) == set(range(9))
        assert all(e.label in ("A", "B") for e in state.round_log)

    def test_k_one_reproduces_baseline(self):
        for measure in ConfidenceMeasure:
            ms = fresh_model()
            coll = collection(17, 8)
            baseline = identify_batch(ms, coll)
            state = adapt_epoch(ms, coll, AdaptPlan(k=1, measure=measure))
            assert state.finalized == {i: r.best for i, r in enumerate(baseline)}
            by_index = {e.index: e for e in state.round_log}
            for i, r in enumerate(baseline):
                assert by_index[i].confidence == confidence(r, measure)

    def test_k_larger_than_collection_is_clamped(self):
        ms = fresh_model()
        state = adapt_epoch(ms, collection(19, 5), AdaptPlan(k=50))
        assert state.q == 5
        assert Counter(e.round for e in state.round_log) == \
               {r: 1 for r in range(5)}

    def test_empty_collection(self):
        ms = fresh_model()
        state = adapt_epoch(ms, unlabeled([]), AdaptPlan(k=4))
        assert state.finalized == {} and state.round_log == [] and state.q == 0

    def test_collection_labels_are_ignored(self):
        texts = [inst.text for inst in collection(23, 8)]
        wrongly_labeled = labeled([(t, "B") for t in texts])
        ms1, ms2 = fresh_model(), fresh_model()
        s1 = adapt_epoch(ms1, unlabeled(texts), AdaptPlan(k=3))
        s2 = adapt_epoch(ms2, wrongly_labeled, AdaptPlan(k=3))
        assert s1.finalized == s2.finalized
        assert s1.round_log == s2.round_log

    def test_deterministic_replay(self):
        rng = random.Random(6011)
        for _ in range(10):
            pairs, _, config = random_toy(rng)
            spec = expand_backoff(config["backoff"], config["n_max"])
            coll = unlabeled([random_text(rng) for _ in range(6)])
            plan = AdaptPlan(k=rng.randint(1, 6),
                             measure=rng.choice(list(ConfidenceMeasure)))
            states = []
            for _ in range(2):
                ms = train(labeled(pairs), config["languages"],
                           config["p_mod"], spec)
                states.append(adapt_epoch(ms, coll, plan))
            assert states[0].finalized == states[1].finalized
            assert states[0].round_log == states[1].round_log


class TestThreshold:
    def test_unreachable_threshold_freezes_models(self, tmp_path):
        ms = fresh_model()
        before = model_bytes(ms, tmp_path)
        coll = collection(29, 8)
        baseline = identify_batch(fresh_model(), coll)
        state = adapt_epoch(ms, coll, AdaptPlan(k=4, threshold=float("inf")))
        assert model_bytes(ms, tmp_path) == before
        assert all(not e.added for e in state.round_log)
        # nothing was ever added, so every round scored with the trained
        # models and the final labels equal the baseline
        assert state.finalized == {i: r.best for i, r in enumerate(baseline)}

    def test_below_threshold_instances_are_still_finalized(self):
        ms = fresh_model()
        coll = collection(31, 9)
        probe = adapt_epoch(fresh_model(), coll, AdaptPlan(k=3))
        cut = sorted(e.confidence for e in probe.round_log)[4]
        state = adapt_epoch(ms, coll, AdaptPlan(k=3, threshold=cut))
        assert set(state.finalized) == set(range(9))
        for e in state.round_log:
            assert e.added == (e.confidence >= cut)
        assert any(e.added for e in state.round_log)
        assert any(not e.added for e in state.round_log)

    def test_threshold_zero_adds_everything(self):
        ms = fresh_model()
        state = adapt_epoch(ms, collection(37, 6), AdaptPlan(k=2, threshold=0.0))
        assert all(e.added for e in state.round_log)


class TestDegenerateInstances:
    def test_ties_commit_in_index_order(self):
        # none of these shares a bigram with the training data, and the
        # unreachable threshold keeps the models frozen, so every round is
        # an all-zero-confidence tie resolved by instance index
        ms = train(labeled([("abc", "A"), ("hund", "B")]), ("A", "B"), 1.1,
                   expand_backoff("char2:lower", 2))
        coll = unlabeled(["xq", "zq", "qq", "qx"])
        state = adapt_epoch(ms, coll,
                            AdaptPlan(k=2, threshold=float("inf")))
        assert [e.index for e in state.round_log] == [0, 1, 2, 3]
        assert [e.round for e in state.round_log] == [0, 0, 1, 1]
        assert all(e.confidence == 0.0 for e in state.round_log)
        # degenerate instances fall to the first configured language
        assert all(e.label == "A" for e in state.round_log)


class TestIterative:
    def test_single_epoch_equals_adapt_epoch(self):
        for mode in ("replace", "accumulate"):
            coll = collection(41, 8)
            plan = AdaptPlan(k=3, epochs=1, epoch_mode=mode)
            ms1, ms2 = fresh_model(), fresh_model()
            result = adapt_iterative(ms1, coll, plan)
            state = adapt_epoch(ms2, coll, plan)
            assert result.epochs_run == 1
            assert result.fixed_point_epoch is None
            assert result.state.finalized == state.finalized
            assert result.state.round_log == state.round_log

    def test_replace_mode_reaches_fixed_point_at_second_epoch(self, tmp_path):
        coll = collection(43, 10)
        one = fresh_model()
        adapt_iterative(one, coll, AdaptPlan(k=4, epochs=1))
        after_one = model_bytes(one, tmp_path)

        many = fresh_model()
        result = adapt_iterative(many, coll,
                                 AdaptPlan(k=4, epochs=5, epoch_mode="replace"))
        assert result.epochs_run == 5
        assert result.fixed_point_epoch == 2
        # each epoch first restores the trained counts, so the final model
        # equals the single-epoch one byte for byte
        assert model_bytes(many, tmp_path) == after_one

    def test_stop_on_fixed_point(self):
        coll = collection(47, 10)
        ms = fresh_model()
        result = adapt_iterative(ms, coll,
                                 AdaptPlan(k=4, epochs=9, epoch_mode="replace",
                                           stop_on_fixed_point=True))
        assert result.fixed_point_epoch == 2
        assert result.epochs_run == 2

    def test_accumulate_mode_grows_counts(self):
        coll = collection(53, 10)
        word = fresh_model().backoff_order[0]
        ms = fresh_model()
        adapt_iterative(ms, coll, AdaptPlan(k=4, epochs=1))
        once = sum(ms.total(lang, word) for lang in ms.languages)
        ms = fresh_model()
        adapt_iterative(ms, coll,
                        AdaptPlan(k=4, epochs=3, epoch_mode="accumulate"))
        thrice = sum(ms.total(lang, word) for lang in ms.languages)
        assert thrice > once

    def test_models_stay_consistent_across_epochs(self):
        for mode in ("replace", "accumulate"):
            ms = fresh_model()
            adapt_iterative(ms, collection(59, 10),
                            AdaptPlan(k=4, epochs=3, epoch_mode=mode))
            ms.validate()

    def test_empty_collection_trivially_fixed(self):
        ms = fresh_model()
        result = adapt_iterative(ms, unlabeled([]), AdaptPlan(k=2, epochs=3))
        assert result.epochs_run == 3
        assert result.fixed_point_epoch == 2
        assert result.state.finalized == {}


class TestFixedPointDetect:
    def test_equal_assignments(self):
        a = AdaptState(finalized={0: "A", 1: "B"})
        b = AdaptState(finalized={1: "B", 0: "A"})
        assert fixed_point_detect(a, b)

    def test_differing_assignments(self):
        a = AdaptState(finalized={0: "A", 1: "B"})
        b = AdaptState(finalized={0: "A", 1: "A"})
        assert not fixed_point_detect(a, b)
