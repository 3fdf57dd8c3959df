"""Evaluation metrics, calibration reports and parameter sweeps.

Conventions: every precision/recall/F1 ratio with a zero denominator is 0.
Macro F1 averages over the classes that occur in the gold labels; weighted
F1 weights those same classes by their gold counts. Classes that are only
ever predicted still get a per-class row but do not enter the averages.
Accuracy is the fraction of exactly matching positions.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from lidkit.adapt import AdaptPlan, adapt_iterative
from lidkit.confidence import ConfidenceMeasure
from lidkit.corpus import Dataset
from lidkit.errors import ConfigError, DataError, LidkitError
from lidkit.models import derive_languages, expand_backoff, train
from lidkit.scorer import identify_batch


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    gold_count: int
    predicted_count: int


@dataclass(frozen=True)
class MetricReport:
    per_class: dict[str, ClassMetrics]
    macro_f1: float
    weighted_f1: float
    accuracy: float
    total: int

    def get(self, objective: str) -> float:
        try:
            return {"macro_f1": self.macro_f1,
                    "weighted_f1": self.weighted_f1,
                    "accuracy": self.accuracy}[objective]
        except KeyError:
            raise ConfigError(f"unknown objective {objective!r}") from None


OBJECTIVES = ("macro_f1", "weighted_f1", "accuracy")


class ConfusionMatrix:
    """Counts of (gold, predicted) pairs over the union label universe."""

    def __init__(self, gold: Sequence[str], predicted: Sequence[str]):
        if len(gold) != len(predicted):
            raise DataError(f"length mismatch: {len(gold)} gold labels vs "
                            f"{len(predicted)} predictions")
        self.labels = tuple(sorted(set(gold) | set(predicted)))
        self._cells: dict[tuple[str, str], int] = {}
        for g, p in zip(gold, predicted):
            key = (g, p)
            self._cells[key] = self._cells.get(key, 0) + 1
        self.total = len(gold)

    def count(self, gold_label: str, predicted_label: str) -> int:
        return self._cells.get((gold_label, predicted_label), 0)

    def gold_count(self, label: str) -> int:
        return sum(c for (g, _), c in self._cells.items() if g == label)

    def predicted_count(self, label: str) -> int:
        return sum(c for (_, p), c in self._cells.items() if p == label)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def metrics(gold: Sequence[str], predicted: Sequence[str]) -> MetricReport:
    """Per-class precision/recall/F1, macro and weighted F1, accuracy."""
    if not gold:
        raise DataError("cannot evaluate empty inputs")
    cm = ConfusionMatrix(gold, predicted)
    per_class: dict[str, ClassMetrics] = {}
    for label in cm.labels:
        tp = cm.count(label, label)
        gc = cm.gold_count(label)
        pc = cm.predicted_count(label)
        p = _ratio(tp, pc)
        r = _ratio(tp, gc)
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        per_class[label] = ClassMetrics(p, r, f1, gc, pc)
    gold_classes = [lab for lab in cm.labels if per_class[lab].gold_count]
    macro = sum(per_class[lab].f1 for lab in gold_classes) / len(gold_classes)
    weighted = sum(per_class[lab].f1 * per_class[lab].gold_count
                   for lab in gold_classes) / cm.total
    correct = sum(cm.count(lab, lab) for lab in cm.labels)
    return MetricReport(per_class=per_class, macro_f1=macro,
                        weighted_f1=weighted, accuracy=correct / cm.total,
                        total=cm.total)


def filter_labels(gold: Sequence[str], predicted: Sequence[str],
                  drop: Iterable[str]) -> tuple[list[str], list[str]]:
    """Drop every position whose gold label is in ``drop``."""
    if len(gold) != len(predicted):
        raise DataError(f"length mismatch: {len(gold)} gold labels vs "
                        f"{len(predicted)} predictions")
    dropset = set(drop)
    kept = [(g, p) for g, p in zip(gold, predicted) if g not in dropset]
    return [g for g, _ in kept], [p for _, p in kept]


# ----------------------------------------------------------------------
# calibration

@dataclass(frozen=True)
class DecileRow:
    bucket: int          # 1 = most confident
    size: int
    accuracy: float | None


def chunk_sizes(total: int, parts: int) -> list[int]:
    """Contiguous split sizes, largest (ceil) chunks first, summing to total."""
    sizes = []
    remaining = total
    for left in range(parts, 0, -1):
        size = -(remaining // -left)
        sizes.append(size)
        remaining -= size
    return sizes


def decile_report(confidences: Sequence[float],
                  correct: Sequence[bool]) -> list[DecileRow]:
    """Mean accuracy per confidence decile, most confident bucket first.

    Instances are ordered by descending confidence, ties keeping input
    order, then split into 10 contiguous buckets.
    """
    if len(confidences) != len(correct):
        raise DataError(f"length mismatch: {len(confidences)} confidences vs "
                        f"{len(correct)} outcomes")
    n = len(confidences)
    if n == 0:
        return []
    order = sorted(range(n), key=lambda i: -confidences[i])
    rows = []
    pos = 0
    for bucket, size in enumerate(chunk_sizes(n, 10), start=1):
        if size:
            hits = sum(1 for i in order[pos : pos + size] if correct[i])
            rows.append(DecileRow(bucket, size, hits / size))
        else:
            rows.append(DecileRow(bucket, 0, None))
        pos += size
    return rows


# ----------------------------------------------------------------------
# parameter sweep

@dataclass(frozen=True)
class CellParams:
    n_max: int
    p_mod: float
    backoff: str
    k: int
    epochs: int
    threshold: float | None


@dataclass(frozen=True)
class SweepGrid:
    """Axes of an exhaustive sweep; each field lists the candidate values."""

    n_max: tuple[int, ...] = (5,)
    p_mod: tuple[float, ...] = (1.1,)
    backoff: tuple[str, ...] = ("word:lower+chars:lower",)
    k: tuple[int, ...] = (1,)
    epochs: tuple[int, ...] = (1,)
    threshold: tuple[float | None, ...] = (None,)

    def cells(self) -> list[CellParams]:
        """Cartesian product in deterministic enumeration order."""
        return [CellParams(*combo) for combo in itertools.product(
            self.n_max, self.p_mod, self.backoff, self.k,
            self.epochs, self.threshold)]


@dataclass(frozen=True)
class SweepRow:
    params: CellParams
    macro_f1: float | None
    weighted_f1: float | None
    accuracy: float | None
    objective_value: float | None
    error: str | None = None


@dataclass(frozen=True)
class SweepResult:
    objective: str
    rows: list[SweepRow]
    best: SweepRow | None


_CTX: dict | None = None


def _cell_init(train_ds: Dataset, dev_ds: Dataset, measure: ConfidenceMeasure,
               epoch_mode: str, objective: str) -> None:
    global _CTX
    _CTX = {"train": train_ds, "dev": dev_ds, "measure": measure,
            "epoch_mode": epoch_mode, "objective": objective}


def _eval_cell(params: CellParams) -> SweepRow:
    ctx = _CTX
    try:
        backoff = expand_backoff(params.backoff, params.n_max)
        train_ds: Dataset = ctx["train"]
        dev_ds: Dataset = ctx["dev"]
        ms = train(train_ds, derive_languages(train_ds), params.p_mod, backoff)
        if params.k == 1 and params.epochs == 1:
            predictions = [ident.best for ident in identify_batch(ms, dev_ds)]
        else:
            plan = AdaptPlan(k=params.k, epochs=params.epochs,
                             measure=ctx["measure"],
                             threshold=params.threshold,
                             epoch_mode=ctx["epoch_mode"])
            result = adapt_iterative(ms, dev_ds, plan)
            predictions = [result.state.finalized[i] for i in range(len(dev_ds))]
        report = metrics(dev_ds.labels(), predictions)
    except LidkitError as exc:
        return SweepRow(params, None, None, None, None,
                        error=f"{type(exc).__name__}: {exc}")
    return SweepRow(params, report.macro_f1, report.weighted_f1,
                    report.accuracy, report.get(ctx["objective"]))


def sweep(train_ds: Dataset, dev_ds: Dataset, grid: SweepGrid,
          objective: str = "macro_f1",
          measure: ConfidenceMeasure = ConfidenceMeasure.BS,
          epoch_mode: str = "replace", workers: int = 1) -> SweepResult:
    """Evaluate every grid cell on the dev set.

    Each cell trains its own models on ``train_ds`` and evaluates on
    ``dev_ds``: directly for k = epochs = 1, otherwise through adaptation
    on the dev texts. Cell failures are recorded in their row rather than
    aborting the sweep. The best row is the first, in enumeration order,
    with the strictly highest objective value. With workers > 1 cells run
    in a process pool; results are identical to the sequential run.
    """
    if objective not in OBJECTIVES:
        raise ConfigError(f"unknown objective {objective!r}")
    if not dev_ds.labeled:
        raise DataError("sweep requires a labeled dev set")
    cells = grid.cells()
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(
                max_workers=min(workers, len(cells)),
                initializer=_cell_init,
                initargs=(train_ds, dev_ds, measure, epoch_mode, objective),
        ) as pool:
            rows = list(pool.map(_eval_cell, cells))
    else:
        _cell_init(train_ds, dev_ds, measure, epoch_mode, objective)
        rows = [_eval_cell(params) for params in cells]
    best = None
    for row in rows:
        if row.error is None and (best is None
                                  or row.objective_value > best.objective_value):
            best = row
    return SweepResult(objective=objective, rows=rows, best=best)


# ----------------------------------------------------------------------
# report formatting

def _fmt(value: float | None, digits: int = 4) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def format_metrics_table(report: MetricReport) -> str:
    labels = sorted(report.per_class)
    width = max(5, max(len(lab) for lab in labels))
    lines = [f"{'class':<{width}}  {'precision':>9}  {'recall':>9}  "
             f"{'f1':>9}  {'gold':>6}"]
    for lab in labels:
        m = report.per_class[lab]
        lines.append(f"{lab:<{width}}  {m.precision:>9.4f}  {m.recall:>9.4f}  "
                     f"{m.f1:>9.4f}  {m.gold_count:>6}")
    lines.append("")
    lines.append(f"instances    {report.total}")
    lines.append(f"accuracy     {report.accuracy:.4f}")
    lines.append(f"macro f1     {report.macro_f1:.4f}")
    lines.append(f"weighted f1  {report.weighted_f1:.4f}")
    return "\n".join(lines) + "\n"


def metrics_tsv(report: MetricReport) -> str:
    lines = ["class\tprecision\trecall\tf1\tgold\tpredicted"]
    for lab in sorted(report.per_class):
        m = report.per_class[lab]
        lines.append(f"{lab}\t{m.precision!r}\t{m.recall!r}\t{m.f1!r}"
                     f"\t{m.gold_count}\t{m.predicted_count}")
    lines.append(f"accuracy\t{report.accuracy!r}")
    lines.append(f"macro_f1\t{report.macro_f1!r}")
    lines.append(f"weighted_f1\t{report.weighted_f1!r}")
    return "\n".join(lines) + "\n"


def format_decile_table(rows: list[DecileRow]) -> str:
    lines = [f"{'decile':>6}  {'size':>6}  {'accuracy':>8}"]
    for row in rows:
        lines.append(f"{row.bucket:>6}  {row.size:>6}  {_fmt(row.accuracy):>8}")
    return "\n".join(lines) + "\n"


def deciles_tsv(rows: list[DecileRow]) -> str:
    lines = ["decile\tsize\taccuracy"]
    for row in rows:
        acc = "" if row.accuracy is None else repr(row.accuracy)
        lines.append(f"{row.bucket}\t{row.size}\t{acc}")
    return "\n".join(lines) + "\n"


def _cell_desc(params: CellParams) -> list[str]:
    thr = "none" if params.threshold is None else repr(params.threshold)
    return [str(params.n_max), repr(params.p_mod), params.backoff,
            str(params.k), str(params.epochs), thr]


_SWEEP_COLS = ["n_max", "p_mod", "backoff", "k", "epochs", "threshold",
               "macro_f1", "weighted_f1", "accuracy", "error"]


def format_sweep_table(result: SweepResult) -> str:
    grid = [_SWEEP_COLS]
    for row in result.rows:
        grid.append(_cell_desc(row.params)
                    + [_fmt(row.macro_f1), _fmt(row.weighted_f1),
                       _fmt(row.accuracy), row.error or ""])
    widths = [max(len(r[c]) for r in grid) for c in range(len(_SWEEP_COLS))]
    lines = ["  ".join(f"{cell:<{w}}" for cell, w in zip(r, widths)).rstrip()
             for r in grid]
    if result.best is None:
        lines.append("no successful cells")
    else:
        lines.append(f"best {result.objective} "
                     f"{_fmt(result.best.objective_value)} at "
                     + " ".join(f"{k}={v}" for k, v in
                                zip(_SWEEP_COLS[:6], _cell_desc(result.best.params))))
    return "\n".join(lines) + "\n"


def sweep_tsv(result: SweepResult) -> str:
    lines = ["\t".join(_SWEEP_COLS)]
    for row in result.rows:
        vals = [repr(v) if isinstance(v, float) else ("" if v is None else str(v))
                for v in (row.macro_f1, row.weighted_f1, row.accuracy)]
        lines.append("\t".join(_cell_desc(row.params) + vals
                               + [row.error or ""]))
    return "\n".join(lines) + "\n"
