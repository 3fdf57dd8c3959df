"""Corpus loading, tokenization and character n-gram extraction.

File formats (UTF-8, LF or CRLF):
  labeled    one instance per line, ``text<TAB>label``; the label is
             everything after the last tab, so tabs inside the text survive
             a round trip
  unlabeled  one instance per line, raw text; empty lines are skipped with
             a warning and do not consume an index
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator

import regex

from lidkit.errors import DataError, ParseError

log = logging.getLogger("lidkit")

# A character is word-internal iff it carries the Unicode Alphabetic property.
# This keeps combining vowel signs (Devanagari matras) and ideographs inside
# tokens; digits, punctuation and all whitespace delimit.
_TOKEN = regex.compile(r"\p{Alphabetic}+")


@dataclass(frozen=True)
class PreprocScheme:
    """A named token preprocessing scheme; currently lowercasing or not."""

    name: str
    lowercase: bool

    def apply(self, token: str) -> str:
        return token.lower() if self.lowercase else token


#: The built-in schemes usable in back-off specifications and model files.
SCHEMES = {
    "orig": PreprocScheme("orig", lowercase=False),
    "lower": PreprocScheme("lower", lowercase=True),
}

_RAW = SCHEMES["orig"]


@dataclass(frozen=True)
class Instance:
    """One line of a corpus. ``label`` is None for unlabeled data."""

    index: int
    text: str
    label: str | None = None


class Dataset:
    """An ordered, immutable collection of instances.

    Indices are 0-based and contiguous; iteration order is index order.
    """

    def __init__(self, instances: list[Instance], labeled: bool):
        for i, inst in enumerate(instances):
            if inst.index != i:
                raise ValueError(f"instance at position {i} has index {inst.index}")
            if labeled and inst.label is None:
                raise ValueError(f"instance {i} lacks a label in a labeled dataset")
        self._instances = tuple(instances)
        self.labeled = labeled

    def __len__(self) -> int:
        return len(self._instances)

    def __iter__(self) -> Iterator[Instance]:
        return iter(self._instances)

    def __getitem__(self, index: int) -> Instance:
        return self._instances[index]

    def labels(self) -> list[str]:
        if not self.labeled:
            raise DataError("dataset has no labels")
        return [inst.label for inst in self._instances]

    def texts(self) -> list[str]:
        return [inst.text for inst in self._instances]


def tokenize(text: str, scheme: PreprocScheme = _RAW) -> list[str]:
    """Split ``text`` into words and apply the scheme's preprocessing.

    Words are maximal runs of Unicode-Alphabetic characters; everything
    else is a delimiter and is dropped.
    """
    tokens = _TOKEN.findall(text)
    if scheme.lowercase:
        return [t.lower() for t in tokens]
    return tokens


def extract_char_ngrams(word: str, n: int) -> list[str]:
    """Overlapping n-grams of ``word`` padded with one space on each side.

    A word of length l yields exactly l + 3 - n grams; n must not exceed
    l + 2 (the padded length).
    """
    if not word:
        raise ValueError("word must be non-empty")
    if n < 1 or n > len(word) + 2:
        raise ValueError(f"n={n} out of range for word of length {len(word)}")
    padded = f" {word} "
    return [padded[i : i + n] for i in range(len(word) + 3 - n)]


def _read_lines(path: str) -> Iterator[tuple[int, str]]:
    """Yield (1-based line number, line without terminator)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                yield lineno, line.rstrip("\n").rstrip("\r")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: invalid UTF-8: {exc}") from exc


def load_labeled(path: str) -> Dataset:
    """Load a ``text<TAB>label`` corpus. Malformed lines are fatal."""
    instances: list[Instance] = []
    for lineno, line in _read_lines(path):
        if not line:
            raise ParseError(f"{path}:{lineno}: empty line in labeled corpus")
        text, sep, label = line.rpartition("\t")
        if not sep:
            raise ParseError(f"{path}:{lineno}: expected TEXT<TAB>LABEL")
        if not text:
            raise ParseError(f"{path}:{lineno}: empty text field")
        if not label or any(ch.isspace() for ch in label):
            raise ParseError(f"{path}:{lineno}: label must be a non-empty token "
                             f"without whitespace, got {label!r}")
        instances.append(Instance(len(instances), text, label))
    if not instances:
        log.warning("%s: empty corpus", path)
    return Dataset(instances, labeled=True)


def load_unlabeled(path: str) -> Dataset:
    """Load raw text lines. Empty lines are skipped and logged."""
    instances: list[Instance] = []
    for lineno, line in _read_lines(path):
        if not line:
            log.warning("%s:%d: skipping empty line", path, lineno)
            continue
        instances.append(Instance(len(instances), line))
    if not instances:
        log.warning("%s: empty corpus", path)
    return Dataset(instances, labeled=False)


def write_labeled(dataset: Dataset, path: str) -> None:
    if not dataset.labeled:
        raise DataError("cannot write an unlabeled dataset in labeled format")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for inst in dataset:
            fh.write(f"{inst.text}\t{inst.label}\n")


def write_unlabeled(dataset: Dataset, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for inst in dataset:
            fh.write(f"{inst.text}\n")


def split_dev_tail(dataset: Dataset, tail: int) -> tuple[Dataset, Dataset]:
    """Split a labeled dataset: the last ``tail`` lines of each label go to
    the dev part, everything else to the train part. Relative order is kept
    and both parts are reindexed."""
    if not dataset.labeled:
        raise DataError("dev-tail split requires a labeled dataset")
    if tail < 1:
        raise DataError(f"tail must be >= 1, got {tail}")
    per_label: dict[str, list[int]] = {}
    for inst in dataset:
        per_label.setdefault(inst.label, []).append(inst.index)
    dev_indices = set()
    for label, indices in per_label.items():
        if len(indices) <= tail:
            log.warning("label %s has only %d lines; all go to the dev part",
                        label, len(indices))
        dev_indices.update(indices[-tail:])
    train_part: list[Instance] = []
    dev_part: list[Instance] = []
    for inst in dataset:
        target = dev_part if inst.index in dev_indices else train_part
        target.append(Instance(len(target), inst.text, inst.label))
    return Dataset(train_part, labeled=True), Dataset(dev_part, labeled=True)
