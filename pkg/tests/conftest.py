"""Shared builders for the test suite."""

from __future__ import annotations

import random

from lidkit.corpus import Dataset, Instance
from lidkit.models import ModelSet, expand_backoff, train


def labeled(pairs: list[tuple[str, str]]) -> Dataset:
    return Dataset([Instance(i, text, label) for i, (text, label) in enumerate(pairs)],
                   labeled=True)


def unlabeled(texts: list[str]) -> Dataset:
    return Dataset([Instance(i, text) for i, text in enumerate(texts)],
                   labeled=False)


BACKOFF_VARIANTS = (
    "word:lower+chars:lower",
    "word:orig+chars:orig",
    "chars:lower",
    "chars:orig/lower",
    "word:lower+char2:lower+char1:lower",
)


def random_word(rng: random.Random, alphabet: str = "ab") -> str:
    return "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 5)))


def random_toy(rng: random.Random) -> tuple[list[tuple[str, str]], ModelSet, dict]:
    """A small random training corpus and a model set trained on it.

    Every language gets at least one word of length >= 4 so no (language,
    kind) total is zero for n-gram sizes up to 5.
    """
    languages = ("A", "B", "C")[: rng.randint(2, 3)]
    n_max = rng.randint(1, 3)
    p_mod = 1.0 + rng.random() * 0.5
    spec = rng.choice(BACKOFF_VARIANTS)
    pairs = []
    for lang in languages:
        anchor = "".join(rng.choice("ab") for _ in range(4))
        lines = rng.randint(1, 3)
        for j in range(lines):
            words = [random_word(rng) for _ in range(rng.randint(1, 4))]
            if j == 0:
                words.append(anchor)
            pairs.append((" ".join(words), lang))
    rng.shuffle(pairs)
    config = {"languages": languages, "p_mod": p_mod, "n_max": n_max,
              "backoff": spec}
    ms = train(labeled(pairs), languages, p_mod, expand_backoff(spec, n_max))
    return pairs, ms, config


def random_text(rng: random.Random) -> str:
    words = []
    for _ in range(rng.randint(1, 6)):
        alphabet = "ab" if rng.random() < 0.8 else "xyz"
        words.append(random_word(rng, alphabet))
    return " ".join(words)
