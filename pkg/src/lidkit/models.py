"""Per-language feature count models.

A ModelSet holds, for every configured feature kind (word counts or
character n-grams under a preprocessing scheme), one count table shared by
all languages: feature -> vector of per-language counts. A feature is in the
union domain of a kind iff some language has a positive count for it, which
is exactly the membership test back-off scoring needs.

The value of feature f for language g under kind K is

    -log10(c / l)          if c > 0
    -log10(1 / l) * p_mod  if c == 0   (the penalty value)

with c the count of f for g under K and l the total count for g under K.
Lower is better; p_mod >= 1 makes unseen features at least as expensive as
any seen one.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator, KeysView, Mapping, Sequence

from lidkit.corpus import SCHEMES, Dataset, PreprocScheme, tokenize
from lidkit.errors import (ConfigError, ConsistencyError, ModelFormatError,
                           TrainingError)

MODEL_FORMAT_VERSION = 1

_LOG10_INT: dict[int, float] = {}


def _log10_int(c: int) -> float:
    """math.log10 over positive integer counts, memoized."""
    v = _LOG10_INT.get(c)
    if v is None:
        v = _LOG10_INT[c] = math.log10(c)
    return v


@dataclass(frozen=True)
class FeatureKind:
    """One feature family: word counts (n is None) or char n-grams."""

    scheme: str
    n: int | None = None

    def describe(self) -> str:
        base = "word" if self.n is None else f"char{self.n}"
        return f"{base}:{self.scheme}"


def parse_kind(text: str) -> FeatureKind:
    """Parse a kind descriptor such as ``word:lower`` or ``char4:orig``."""
    head, sep, scheme = text.partition(":")
    if not sep or not scheme:
        raise ConfigError(f"bad feature kind {text!r}: expected KIND:SCHEME")
    if head == "word":
        return FeatureKind(scheme, None)
    if head.startswith("char"):
        try:
            n = int(head[4:])
        except ValueError:
            raise ConfigError(f"bad feature kind {text!r}") from None
        if n < 1:
            raise ConfigError(f"char n-gram size must be >= 1 in {text!r}")
        return FeatureKind(scheme, n)
    raise ConfigError(f"bad feature kind {text!r}")


def expand_backoff(spec: str, n_max: int) -> tuple[FeatureKind, ...]:
    """Expand a back-off specification into an ordered tuple of kinds.

    Entries are joined with ``+`` and tried in order when scoring:

      word:SCHEME       one word model
      charN:SCHEME      one char n-gram model of size N
      chars:S1/S2/...   char n-gram models for n = n_max .. 1, schemes
                        interleaved at each size

    A missing ``:SCHEME`` part defaults to ``lower``.
    """
    kinds: list[FeatureKind] = []
    for entry in spec.split("+"):
        entry = entry.strip()
        if not entry:
            raise ConfigError(f"empty entry in back-off spec {spec!r}")
        head, _, scheme_part = entry.partition(":")
        schemes = scheme_part.split("/") if scheme_part else ["lower"]
        for s in schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r} in back-off entry {entry!r}")
        if head == "chars":
            if n_max < 1:
                raise ConfigError(f"n_max must be >= 1 to expand {entry!r}")
            for n in range(n_max, 0, -1):
                kinds.extend(FeatureKind(s, n) for s in schemes)
        else:
            kinds.extend(parse_kind(f"{head}:{s}") for s in schemes)
    if len(set(kinds)) != len(kinds):
        raise ConfigError(f"back-off spec {spec!r} repeats a feature kind")
    return tuple(kinds)


class _Store:
    """Count table for one feature kind across all languages."""

    __slots__ = ("counts", "totals")

    def __init__(self, nlang: int):
        self.counts: dict[str, list[int]] = {}
        self.totals: list[int] = [0] * nlang


class ModelSet:
    """Trained language models plus the scoring configuration.

    The order of ``languages`` is the configuration order; every tie in
    scoring, ranking and adaptation is broken by it.
    """

    def __init__(self, languages: Sequence[str], p_mod: float,
                 backoff_order: Sequence[FeatureKind],
                 schemes: Mapping[str, PreprocScheme] | None = None):
        languages = tuple(languages)
        if len(languages) < 2:
            raise ConfigError("at least two languages are required")
        if len(set(languages)) != len(languages):
            raise ConfigError("duplicate language codes")
        for lang in languages:
            if not lang or any(ch.isspace() for ch in lang):
                raise ConfigError(f"bad language code {lang!r}")
        if not p_mod >= 1.0:
            raise ConfigError(f"p_mod must be >= 1, got {p_mod}")
        backoff_order = tuple(backoff_order)
        if not backoff_order:
            raise ConfigError("backoff_order must not be empty")
        if len(set(backoff_order)) != len(backoff_order):
            raise ConfigError("backoff_order repeats a feature kind")
        self.languages = languages
        self.p_mod = float(p_mod)
        self.backoff_order = backoff_order
        self.schemes: dict[str, PreprocScheme] = {}
        for kind in backoff_order:
            if kind.n is not None and kind.n < 1:
                raise ConfigError(f"bad n-gram size in {kind.describe()}")
            if kind.scheme in self.schemes:
                continue
            if schemes is not None and kind.scheme in schemes:
                self.schemes[kind.scheme] = schemes[kind.scheme]
            elif kind.scheme in SCHEMES:
                self.schemes[kind.scheme] = SCHEMES[kind.scheme]
            else:
                raise ConfigError(f"unknown preprocessing scheme {kind.scheme!r}")
        self._lang_index = {lang: g for g, lang in enumerate(languages)}
        self._stores = {kind: _Store(len(languages)) for kind in backoff_order}
        # Caches shared by training and adaptation updates; bounded by the
        # vocabulary of the run.
        self._lower_cache: dict[str, str] = {}
        self._gram_cache: dict[int, dict[str, tuple[str, ...]]] = {
            kind.n: {} for kind in backoff_order if kind.n is not None
        }

    # ------------------------------------------------------------------
    # introspection

    @property
    def n_max(self) -> int:
        return max((k.n for k in self.backoff_order if k.n is not None), default=0)

    def language_index(self, language: str) -> int:
        try:
            return self._lang_index[language]
        except KeyError:
            raise ValueError(f"unknown language {language!r}") from None

    def union_domain(self, kind: FeatureKind) -> KeysView[str]:
        """Features with a positive count in at least one language."""
        return self._kind_store(kind).counts.keys()

    def feature_count(self, language: str, kind: FeatureKind, feature: str) -> int:
        vec = self._kind_store(kind).counts.get(feature)
        return 0 if vec is None else vec[self.language_index(language)]

    def total(self, language: str, kind: FeatureKind) -> int:
        return self._kind_store(kind).totals[self.language_index(language)]

    def _kind_store(self, kind: FeatureKind) -> _Store:
        try:
            return self._stores[kind]
        except KeyError:
            raise ValueError(f"kind {kind.describe()} not configured") from None

    # ------------------------------------------------------------------
    # values

    def value(self, language: str, kind: FeatureKind, feature: str) -> float:
        """Scoring value of one feature for one language. Lower is better.

        The feature must lie in the kind's union domain; for a language
        that has never seen it the penalty value is returned.
        """
        store = self._kind_store(kind)
        vec = store.counts.get(feature)
        if vec is None:
            raise ValueError(f"feature {feature!r} is not in the union domain "
                             f"of {kind.describe()}")
        g = self.language_index(language)
        total = store.totals[g]
        if total == 0:
            raise TrainingError(f"language {language} has no {kind.describe()} "
                                f"counts; model not trained")
        c = vec[g]
        if c:
            return math.log10(total) - _log10_int(c)
        return math.log10(total) * self.p_mod

    # ------------------------------------------------------------------
    # feature extraction shared by training and adaptation

    def _lowered(self, token: str) -> str:
        w = self._lower_cache.get(token)
        if w is None:
            w = self._lower_cache[token] = token.lower()
        return w

    def _grams(self, word: str, n: int) -> tuple[str, ...]:
        cache = self._gram_cache[n]
        grams = cache.get(word)
        if grams is None:
            if n > len(word) + 2:
                grams = ()
            else:
                padded = f" {word} "
                grams = tuple(padded[i : i + n] for i in range(len(word) + 3 - n))
            cache[word] = grams
        return grams

    def _kind_features(self, kind: FeatureKind, tokens: list[str]) -> Iterator[str]:
        lower = self.schemes[kind.scheme].lowercase
        if kind.n is None:
            for tok in tokens:
                yield self._lowered(tok) if lower else tok
        else:
            n = kind.n
            for tok in tokens:
                yield from self._grams(self._lowered(tok) if lower else tok, n)

    def featurize(self, text: str) -> dict[FeatureKind, Counter]:
        """All feature occurrences of ``text``, per configured kind."""
        tokens = tokenize(text)
        return {kind: Counter(self._kind_features(kind, tokens))
                for kind in self.backoff_order}

    # ------------------------------------------------------------------
    # count updates

    def add_instance_features(self, text: str, language: str) -> None:
        """Add every word and n-gram occurrence of ``text`` to ``language``."""
        g = self.language_index(language)
        nlang = len(self.languages)
        tokens = tokenize(text)
        for kind in self.backoff_order:
            store = self._stores[kind]
            counts = store.counts
            added = 0
            for feat in self._kind_features(kind, tokens):
                vec = counts.get(feat)
                if vec is None:
                    vec = counts[feat] = [0] * nlang
                vec[g] += 1
                added += 1
            store.totals[g] += added

    def remove_instance_features(self, text: str, language: str) -> None:
        """Exact inverse of add_instance_features for a previously added text.

        Validates before mutating, so a bad call leaves the models intact.
        """
        g = self.language_index(language)
        per_kind = self.featurize(text)
        for kind, feats in per_kind.items():
            counts = self._stores[kind].counts
            for feat, c in feats.items():
                vec = counts.get(feat)
                if vec is None or vec[g] < c:
                    raise ConsistencyError(
                        f"removing {c} x {feat!r} ({kind.describe()}) from "
                        f"{language} would drive its count negative")
        for kind, feats in per_kind.items():
            store = self._stores[kind]
            counts = store.counts
            removed = 0
            for feat, c in feats.items():
                vec = counts[feat]
                vec[g] -= c
                removed += c
                if not any(vec):
                    del counts[feat]
            store.totals[g] -= removed

    def validate(self) -> None:
        """Check the count invariants; raises ConsistencyError on violation."""
        for kind, store in self._stores.items():
            sums = [0] * len(self.languages)
            for feat, vec in store.counts.items():
                if not any(vec):
                    raise ConsistencyError(
                        f"feature {feat!r} of {kind.describe()} has all-zero counts")
                for g, c in enumerate(vec):
                    if c < 0:
                        raise ConsistencyError(
                            f"negative count for {feat!r} of {kind.describe()}")
                    sums[g] += c
            if sums != store.totals:
                raise ConsistencyError(
                    f"totals of {kind.describe()} do not match the counts")


def train(dataset: Dataset, languages: Sequence[str], p_mod: float,
          backoff_order: Sequence[FeatureKind],
          schemes: Mapping[str, PreprocScheme] | None = None) -> ModelSet:
    """Count every configured feature kind over a labeled corpus."""
    if len(dataset) == 0:
        raise TrainingError("cannot train on an empty dataset")
    if not dataset.labeled:
        raise TrainingError("training requires a labeled dataset")
    ms = ModelSet(languages, p_mod, backoff_order, schemes)
    known = set(ms.languages)
    for inst in dataset:
        if inst.label not in known:
            raise TrainingError(f"line {inst.index + 1}: label {inst.label!r} "
                                f"is not a configured language")
        ms.add_instance_features(inst.text, inst.label)
    return ms


def derive_languages(dataset: Dataset) -> tuple[str, ...]:
    """Language codes in order of first appearance in a labeled corpus."""
    seen: dict[str, None] = {}
    for inst in dataset:
        seen.setdefault(inst.label, None)
    return tuple(seen)


# ----------------------------------------------------------------------
# serialization
#
# Versioned text format, UTF-8, LF only. A sha256 checksum of everything
# after the checksum line guards against truncation and corruption. Blocks
# appear for every (language, kind) pair in configuration order; features
# are sorted by UTF-8 byte order, so saving is deterministic regardless of
# the order counts were accumulated in.

def _canonical_body(ms: ModelSet) -> str:
    lines = ["languages\t" + "\t".join(ms.languages),
             f"p_mod\t{ms.p_mod!r}",
             "schemes\t" + "\t".join(
                 f"{name}={int(scheme.lowercase)}"
                 for name, scheme in sorted(ms.schemes.items())),
             "backoff\t" + "\t".join(k.describe() for k in ms.backoff_order)]
    bykey = lambda s: s.encode("utf-8")
    for g, lang in enumerate(ms.languages):
        for kind in ms.backoff_order:
            store = ms._stores[kind]
            feats = [(f, vec[g]) for f, vec in store.counts.items() if vec[g]]
            feats.sort(key=lambda fc: bykey(fc[0]))
            lines.append(f"block\t{lang}\t{kind.describe()}\t"
                         f"{store.totals[g]}\t{len(feats)}")
            lines.extend(f"{f}\t{c}" for f, c in feats)
    lines.append("end")
    return "\n".join(lines) + "\n"


def save(ms: ModelSet, path: str) -> None:
    body = _canonical_body(ms)
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"lidkit-models {MODEL_FORMAT_VERSION}\n")
        fh.write(f"checksum {digest}\n")
        fh.write(body)


class _BodyReader:
    def __init__(self, lines: list[str], path: str):
        self.lines = lines
        self.pos = 0
        self.path = path

    def next(self, what: str) -> str:
        if self.pos >= len(self.lines):
            raise ModelFormatError(f"{self.path}: truncated model file "
                                   f"(expected {what})")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def fields(self, what: str, prefix: str) -> list[str]:
        parts = self.next(what).split("\t")
        if parts[0] != prefix:
            raise ModelFormatError(f"{self.path}: expected {what}, "
                                   f"got {parts[0]!r}")
        return parts[1:]


def load(path: str) -> ModelSet:
    """Load a model file, verifying version and checksum."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            raw = fh.read()
    except UnicodeDecodeError as exc:
        raise ModelFormatError(f"{path}: not a UTF-8 model file") from exc
    head, _, rest = raw.partition("\n")
    if head != f"lidkit-models {MODEL_FORMAT_VERSION}":
        raise ModelFormatError(f"{path}: unsupported model format {head!r}")
    checkline, _, body = rest.partition("\n")
    if not checkline.startswith("checksum "):
        raise ModelFormatError(f"{path}: missing checksum line")
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    if checkline[len("checksum "):] != digest:
        raise ModelFormatError(f"{path}: checksum mismatch (corrupt or "
                               f"truncated file)")
    if not body.endswith("end\n"):
        raise ModelFormatError(f"{path}: truncated model file")
    rd = _BodyReader(body.split("\n")[:-1], path)

    languages = rd.fields("languages line", "languages")
    p_mod_fields = rd.fields("p_mod line", "p_mod")
    scheme_fields = rd.fields("schemes line", "schemes")
    backoff_fields = rd.fields("backoff line", "backoff")
    try:
        p_mod = float(p_mod_fields[0])
    except (IndexError, ValueError):
        raise ModelFormatError(f"{path}: bad p_mod line") from None
    schemes: dict[str, PreprocScheme] = {}
    for part in scheme_fields:
        name, sep, flag = part.partition("=")
        if not sep or flag not in ("0", "1"):
            raise ModelFormatError(f"{path}: bad scheme entry {part!r}")
        schemes[name] = PreprocScheme(name, flag == "1")
    try:
        backoff = tuple(parse_kind(text) for text in backoff_fields)
        ms = ModelSet(languages, p_mod, backoff, schemes)
    except ConfigError as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc

    nlang = len(ms.languages)
    for g, lang in enumerate(ms.languages):
        for kind in ms.backoff_order:
            header = rd.fields("block header", "block")
            if len(header) != 4 or header[0] != lang or header[1] != kind.describe():
                raise ModelFormatError(
                    f"{path}: expected block for {lang} {kind.describe()}")
            try:
                total, nfeat = int(header[2]), int(header[3])
            except ValueError:
                raise ModelFormatError(f"{path}: bad block header") from None
            store = ms._stores[kind]
            counts = store.counts
            seen = 0
            for _ in range(nfeat):
                line = rd.next("feature line")
                feat, sep, count_text = line.rpartition("\t")
                try:
                    c = int(count_text)
                except ValueError:
                    c = 0
                if not sep or not feat or c < 1:
                    raise ModelFormatError(f"{path}: bad feature line {line!r}")
                vec = counts.get(feat)
                if vec is None:
                    vec = counts[feat] = [0] * nlang
                if vec[g]:
                    raise ModelFormatError(f"{path}: duplicate feature {feat!r} "
                                           f"in block {lang} {kind.describe()}")
                vec[g] = c
                seen += c
            if seen != total:
                raise ModelFormatError(f"{path}: block {lang} {kind.describe()} "
                                       f"total {total} does not match its counts")
            store.totals[g] = total
    if rd.next("end marker") != "end" or rd.pos != len(rd.lines):
        raise ModelFormatError(f"{path}: trailing garbage after end marker")
    return ms
