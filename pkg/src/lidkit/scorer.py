"""Back-off scoring of words and texts against a ModelSet.

Scoring a word walks the model set's back-off order. The first word model
whose union domain contains the (scheme-transformed) word scores it for
every language, with the penalty value standing in for languages that lack
it. Otherwise char n-gram kinds are consulted: n-grams absent from a kind's
union domain are discarded, a kind with at least one retained n-gram scores
the word as the per-language mean over the retained n-grams, and a kind
whose n-grams are all discarded (or whose n exceeds the padded word length)
is skipped in favor of the next entry. A word no kind can score contributes
nothing to the text score.

The text score per language is the mean of its word scores over the
scorable word tokens; the best language is the argmin, ties broken by
configuration order.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from math import log10
from typing import Sequence

from lidkit.corpus import Dataset, tokenize
from lidkit.errors import TrainingError
from lidkit.models import ModelSet, _log10_int


@dataclass
class ScoreCounters:
    """Instrumentation: how words were scored in a batch."""

    kind_words: Counter = field(default_factory=Counter)  # kind descriptor -> words
    dropped_words: int = 0

    @property
    def word_model_words(self) -> int:
        return sum(c for desc, c in self.kind_words.items()
                   if desc.startswith("word:"))


@dataclass(frozen=True)
class Identification:
    """Result of scoring one text.

    ``scores`` maps every language to its text score (lower is better) in
    configuration order; ``ranking`` is best-first. Degenerate texts (no
    scorable words) carry all-zero scores, the configuration order as the
    ranking, and the ``degenerate`` flag.
    """

    scores: dict[str, float]
    ranking: tuple[str, ...]
    word_count: int
    degenerate: bool = False

    @property
    def best(self) -> str:
        return self.ranking[0]

    @property
    def second(self) -> str | None:
        return self.ranking[1] if len(self.ranking) > 1 else None


class _Pass:
    """One scoring pass: per-kind totals frozen, word scores memoized.

    Models must not change while a pass is in use; build a new pass after
    any count update.
    """

    __slots__ = ("nlang", "entries", "cache", "counters")

    def __init__(self, ms: ModelSet, counters: ScoreCounters | None = None):
        self.nlang = len(ms.languages)
        self.cache: dict[str, list[float] | None] = {}
        self.counters = counters
        self.entries = []
        for kind in ms.backoff_order:
            store = ms._stores[kind]
            logl: list[float | None] = []
            pen: list[float | None] = []
            for t in store.totals:
                if t > 0:
                    v = log10(t)
                    logl.append(v)
                    pen.append(v * ms.p_mod)
                else:
                    logl.append(None)
                    pen.append(None)
            self.entries.append((kind.n, ms.schemes[kind.scheme].lowercase,
                                 store.counts, logl, pen, kind.describe()))

    def _score_word(self, word: str) -> list[float] | None:
        nlang = self.nlang
        lowered = None
        for n, lower, counts, logl, pen, desc in self.entries:
            if lower:
                if lowered is None:
                    lowered = word.lower()
                w = lowered
            else:
                w = word
            if n is None:
                vec = counts.get(w)
                if vec is None:
                    continue
                if None in logl:
                    raise TrainingError(f"kind {desc} consulted for a language "
                                        f"with no counts")
                out = []
                for g in range(nlang):
                    c = vec[g]
                    out.append(logl[g] - _log10_int(c) if c else pen[g])
                if self.counters is not None:
                    self.counters.kind_words[desc] += 1
                return out
            lw = len(w)
            if n > lw + 2:
                continue
            padded = f" {w} "
            acc = None
            d = 0
            for i in range(lw + 3 - n):
                vec = counts.get(padded[i : i + n])
                if vec is None:
                    continue   # n-gram absent from the union domain: discarded
                if acc is None:
                    if None in logl:
                        raise TrainingError(f"kind {desc} consulted for a "
                                            f"language with no counts")
                    acc = [0.0] * nlang
                d += 1
                for g in range(nlang):
                    c = vec[g]
                    acc[g] += logl[g] - _log10_int(c) if c else pen[g]
            if d:
                if self.counters is not None:
                    self.counters.kind_words[desc] += 1
                return [a / d for a in acc]
        if self.counters is not None:
            self.counters.dropped_words += 1
        return None

    def word_vector(self, word: str) -> list[float] | None:
        cache = self.cache
        if word in cache:
            return cache[word]
        vec = cache[word] = self._score_word(word)
        return vec

    def score_items(self, items: Sequence[tuple[str, int]]
                    ) -> tuple[list[float] | None, int]:
        """Mean word score per language over (word, multiplicity) items.

        Returns (None, 0) when no word is scorable.
        """
        nlang = self.nlang
        acc = [0.0] * nlang
        nwords = 0
        for word, cnt in items:
            vec = self.word_vector(word)
            if vec is None:
                continue
            nwords += cnt
            for g in range(nlang):
                acc[g] += vec[g] * cnt
        if not nwords:
            return None, 0
        return [a / nwords for a in acc], nwords


def _rank(languages: tuple[str, ...], scores: list[float]) -> tuple[str, ...]:
    order = sorted(range(len(languages)), key=lambda g: (scores[g], g))
    return tuple(languages[g] for g in order)


def _degenerate(ms: ModelSet) -> Identification:
    return Identification(scores={lang: 0.0 for lang in ms.languages},
                          ranking=ms.languages, word_count=0, degenerate=True)


def token_items(text: str) -> list[tuple[str, int]]:
    """Token multiplicities in first-occurrence order."""
    return list(Counter(tokenize(text)).items())


def score_word(ms: ModelSet, word: str) -> dict[str, float] | None:
    """Score one word for every language; None if no kind can score it."""
    if not word:
        raise ValueError("word must be non-empty")
    vec = _Pass(ms)._score_word(word)
    if vec is None:
        return None
    return dict(zip(ms.languages, vec))


def _identify(ms: ModelSet, p: _Pass, items: list[tuple[str, int]]) -> Identification:
    vec, nwords = p.score_items(items)
    if vec is None:
        return _degenerate(ms)
    return Identification(scores=dict(zip(ms.languages, vec)),
                          ranking=_rank(ms.languages, vec),
                          word_count=nwords)


def score_text(ms: ModelSet, text: str) -> Identification:
    """Tokenize and score one text."""
    return _identify(ms, _Pass(ms), token_items(text))


def identify_batch(ms: ModelSet, dataset: Dataset,
                   counters: ScoreCounters | None = None) -> list[Identification]:
    """Score every instance of a dataset against an unchanging ModelSet.

    Equals mapping score_text over the instances; word scores are shared
    across the batch.
    """
    p = _Pass(ms, counters)
    return [_identify(ms, p, token_items(inst.text)) for inst in dataset]
