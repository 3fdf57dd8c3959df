"""Confidence-ranked incremental adaptation of language models.

One epoch walks the unlabeled collection in k rounds. Every round
re-identifies the not-yet-finalized instances with the models as they
stand, ranks them by confidence (ties by index), finalizes the top
ceil(remaining / rounds_left) of them, and adds each finalized instance's
features to its predicted language's models, unless a confidence threshold
says otherwise. k = 1 therefore reproduces the baseline identifications,
and larger k lets early high-confidence decisions sharpen the models the
harder instances are scored with.

Iterative adaptation repeats epochs. In replace mode each later epoch
first removes the feature additions of the previous epoch, restoring the
trained counts exactly; in accumulate mode additions pile up across
epochs, so the collection's own evidence progressively outweighs the
original training data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from lidkit.confidence import ConfidenceMeasure, _raw_confidence
from lidkit.corpus import Dataset
from lidkit.errors import ConfigError
from lidkit.models import ModelSet
from lidkit.scorer import _Pass, token_items

EPOCH_MODES = ("replace", "accumulate")


@dataclass(frozen=True)
class AdaptPlan:
    """Parameters of an adaptation run."""

    k: int = 1
    epochs: int = 1
    measure: ConfidenceMeasure = ConfidenceMeasure.BS
    threshold: float | None = None
    epoch_mode: str = "replace"
    stop_on_fixed_point: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.threshold is not None and not self.threshold >= 0:
            raise ConfigError(f"threshold must be >= 0 or none, "
                              f"got {self.threshold}")
        if self.epoch_mode not in EPOCH_MODES:
            raise ConfigError(f"epoch_mode must be one of {EPOCH_MODES}, "
                              f"got {self.epoch_mode!r}")


@dataclass(frozen=True)
class RoundEntry:
    """One finalized instance: when, what, how sure, and whether its
    features were added to the models (threshold permitting)."""

    round: int
    index: int
    confidence: float
    label: str
    added: bool


@dataclass
class AdaptState:
    """Outcome of one epoch."""

    finalized: dict[int, str] = field(default_factory=dict)
    q: int = 0
    round_log: list[RoundEntry] = field(default_factory=list)


@dataclass(frozen=True)
class AdaptResult:
    """Outcome of an iterative run: the last epoch's state, how many epochs
    actually ran, and the first epoch whose assignments matched the epoch
    before it (None if that never happened)."""

    state: AdaptState
    epochs_run: int
    fixed_point_epoch: int | None


def fixed_point_detect(previous: AdaptState, current: AdaptState) -> bool:
    """True when two epochs finalized identical labels for every instance."""
    return previous.finalized == current.finalized


def adapt_epoch(ms: ModelSet, collection: Dataset, plan: AdaptPlan) -> AdaptState:
    """Run one adaptation epoch over ``collection``, mutating ``ms``.

    Labels on the collection, if any, are ignored. Returns the finalized
    label per instance index plus the per-round commit log.
    """
    state = AdaptState()
    n = len(collection)
    if n == 0:
        return state
    k = min(plan.k, n)
    measure = plan.measure
    threshold = plan.threshold
    items = [token_items(inst.text) for inst in collection]
    remaining = list(range(n))
    while state.q < k:
        p = _Pass(ms)
        scored = []
        for i in remaining:
            vec, _ = p.score_items(items[i])
            if vec is None:
                scored.append((0.0, i, 0))
                continue
            best = 0
            best_score = vec[0]
            for g in range(1, p.nlang):
                if vec[g] < best_score:
                    best, best_score = g, vec[g]
            scored.append((_raw_confidence(measure, vec, best), i, best))
        scored.sort(key=lambda t: (-t[0], t[1]))
        rounds_left = k - state.q
        chunk = -(len(remaining) // -rounds_left)
        committed = set()
        for conf, i, best in scored[:chunk]:
            label = ms.languages[best]
            added = threshold is None or conf >= threshold
            if added:
                ms.add_instance_features(collection[i].text, label)
            state.finalized[i] = label
            state.round_log.append(RoundEntry(state.q, i, conf, label, added))
            committed.add(i)
        remaining = [i for i in remaining if i not in committed]
        state.q += 1
    return state


def _remove_epoch_additions(ms: ModelSet, collection: Dataset,
                            state: AdaptState) -> None:
    for entry in state.round_log:
        if entry.added:
            ms.remove_instance_features(collection[entry.index].text, entry.label)


def adapt_iterative(ms: ModelSet, collection: Dataset,
                    plan: AdaptPlan) -> AdaptResult:
    """Run plan.epochs adaptation epochs, mutating ``ms``.

    Replace mode (the default) re-runs every epoch against the trained
    counts; accumulate mode keeps prior epochs' additions in place. A
    detected fixed point is reported, and ends the run early only when
    plan.stop_on_fixed_point is set.
    """
    previous: AdaptState | None = None
    fixed_point_epoch: int | None = None
    epochs_run = 0
    state = AdaptState()
    for epoch in range(1, plan.epochs + 1):
        if previous is not None and plan.epoch_mode == "replace":
            _remove_epoch_additions(ms, collection, previous)
        state = adapt_epoch(ms, collection, plan)
        epochs_run = epoch
        if (previous is not None and fixed_point_epoch is None
                and fixed_point_detect(previous, state)):
            fixed_point_epoch = epoch
            if plan.stop_on_fixed_point:
                break
        previous = state
    return AdaptResult(state=state, epochs_run=epochs_run,
                       fixed_point_epoch=fixed_point_epoch)
