"""Confidence measures over an identification's language scores.

All three measures grow with the separation between the best language and
the rest, are non-negative, and are invariant under adding a constant to
every score. Degenerate identifications get confidence 0 under every
measure.
"""

from __future__ import annotations

import math
from enum import Enum

from lidkit.errors import ConfigError
from lidkit.scorer import Identification


class ConfidenceMeasure(Enum):
    BS = "bs"      # margin between best and second-best score
    AVG = "avg"    # margin between the mean of the others and the best
    POST = "post"  # log-sum-exp of all scores minus the best

    @classmethod
    def parse(cls, text: str) -> "ConfidenceMeasure":
        try:
            return cls(text)
        except ValueError:
            raise ConfigError(f"unknown confidence measure {text!r}; "
                              f"expected bs, avg or post") from None


def _raw_bs(scores: list[float], best: int) -> float:
    second = min(s for g, s in enumerate(scores) if g != best)
    return second - scores[best]


def _raw_avg(scores: list[float], best: int) -> float:
    others = len(scores) - 1
    return (sum(scores) - scores[best]) / others - scores[best]


def _raw_post(scores: list[float], best: int) -> float:
    # log-sum-exp with max shift; natural log
    m = max(scores)
    return m + math.log(sum(math.exp(s - m) for s in scores)) - scores[best]


_RAW = {ConfidenceMeasure.BS: _raw_bs,
        ConfidenceMeasure.AVG: _raw_avg,
        ConfidenceMeasure.POST: _raw_post}


def _raw_confidence(measure: ConfidenceMeasure, scores: list[float],
                    best: int) -> float:
    if measure is not ConfidenceMeasure.POST and len(scores) < 2:
        raise ValueError(f"{measure.value} confidence requires at least two languages")
    return _RAW[measure](scores, best)


def _from_identification(measure: ConfidenceMeasure, ident: Identification) -> float:
    if ident.degenerate:
        return 0.0
    scores = list(ident.scores.values())
    if measure is ConfidenceMeasure.POST and len(scores) == 1:
        return 0.0
    best = list(ident.scores).index(ident.best)
    return _raw_confidence(measure, scores, best)


def cm_bs(ident: Identification) -> float:
    """Second-best score minus best score."""
    return _from_identification(ConfidenceMeasure.BS, ident)


def cm_avg(ident: Identification) -> float:
    """Mean of the non-best scores minus the best score."""
    return _from_identification(ConfidenceMeasure.AVG, ident)


def cm_post(ident: Identification) -> float:
    """log(sum(exp(scores))) minus the best score, natural log."""
    return _from_identification(ConfidenceMeasure.POST, ident)


def confidence(ident: Identification, measure: ConfidenceMeasure) -> float:
    return _from_identification(measure, ident)
