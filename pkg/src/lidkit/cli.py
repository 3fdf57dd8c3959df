"""Command line interface.

Subcommands: train, identify, adapt, evaluate, sweep, calibrate, inspect,
split-dev. All outputs are deterministic: identical inputs and flags yield
byte-identical files and stdout, whatever --threads says. Exit codes:
0 success, 1 usage or configuration error, 2 data error, 3 a --assert-min
check failed.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from contextlib import contextmanager

from lidkit import adapt as adapt_mod
from lidkit import corpus, evaluation, models, scorer
from lidkit.confidence import ConfidenceMeasure, confidence
from lidkit.errors import ConfigError, DataError, ParseError

log = logging.getLogger("lidkit")

DEFAULT_N_MAX = 5
DEFAULT_P_MOD = 1.1
DEFAULT_BACKOFF = "word:lower+chars:lower"

_CONFIG_KEYS = ("languages", "n_max", "p_mod", "backoff", "k", "epochs",
                "measure", "threshold", "epoch_mode", "threads", "objective")


class _Parser(argparse.ArgumentParser):
    """argparse maps usage errors to exit 2; this artifact reserves 2 for
    data errors, so usage problems raise ConfigError (exit 1) instead."""

    def error(self, message):
        raise ConfigError(message)


def read_config(path: str) -> dict[str, str]:
    """Flat key=value file; comma-separated lists; # starts a comment."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or not key:
                raise ConfigError(f"{path}:{lineno}: expected KEY = VALUE")
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = value.strip()
    return values


def _parse_int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {text!r}") from None


def _parse_float(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {text!r}") from None


def _parse_threshold(text: str) -> float | None:
    if text.lower() == "none":
        return None
    return _parse_float(text, "threshold")


def _parse_epoch_mode(text: str) -> str:
    if text not in adapt_mod.EPOCH_MODES:
        raise ConfigError(f"epoch_mode must be one of {adapt_mod.EPOCH_MODES}, "
                          f"got {text!r}")
    return text


def _resolve(flag_value, config: dict[str, str], key: str, parse, default):
    if flag_value is not None:
        return flag_value
    if key in config:
        return parse(config[key])
    return default


@contextmanager
def _open_out(path: str):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _read_label_lines(path: str) -> list[str]:
    labels = []
    for lineno, line in corpus._read_lines(path):
        if not line or any(ch.isspace() for ch in line):
            raise ParseError(f"{path}:{lineno}: expected one label per line")
        labels.append(line)
    return labels


def _load_gold_labels(path: str) -> list[str]:
    """A gold file is a labeled corpus if its first line has a tab,
    otherwise one label per line."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    if "\t" in first:
        return corpus.load_labeled(path).labels()
    return _read_label_lines(path)


# ----------------------------------------------------------------------
# subcommands

def cmd_train(args) -> int:
    config = read_config(args.config) if args.config else {}
    dataset = corpus.load_labeled(args.corpus)
    if len(dataset) == 0:
        raise DataError(f"{args.corpus}: empty training corpus")
    languages = _resolve(args.languages, config, "languages", str, None)
    languages = (tuple(languages.split(",")) if languages
                 else models.derive_languages(dataset))
    n_max = _resolve(args.n_max, config, "n_max",
                     lambda t: _parse_int(t, "n_max"), DEFAULT_N_MAX)
    p_mod = _resolve(args.p_mod, config, "p_mod",
                     lambda t: _parse_float(t, "p_mod"), DEFAULT_P_MOD)
    backoff_spec = _resolve(args.backoff, config, "backoff", str, DEFAULT_BACKOFF)
    backoff = models.expand_backoff(backoff_spec, n_max)
    ms = models.train(dataset, languages, p_mod, backoff)
    models.save(ms, args.out)
    log.info("trained %d languages on %d instances (%s; p_mod %s) -> %s",
             len(ms.languages), len(dataset), backoff_spec, p_mod, args.out)
    return 0


def cmd_identify(args) -> int:
    ms = models.load(args.model)
    dataset = corpus.load_unlabeled(args.input)
    measure = ConfidenceMeasure.parse(args.confidence)
    idents = scorer.identify_batch(ms, dataset)
    with _open_out(args.out) as fh:
        for ident in idents:
            fh.write(ident.best + "\n")
    if args.scores:
        nlang = len(ms.languages)
        header = ["index"] + [f"rank{r}" for r in range(1, nlang + 1)] + ["confidence"]
        with open(args.scores, "w", encoding="utf-8", newline="") as fh:
            fh.write("\t".join(header) + "\n")
            for inst, ident in zip(dataset, idents):
                cells = [str(inst.index)]
                cells += [f"{lang}:{ident.scores[lang]!r}" for lang in ident.ranking]
                cells.append(repr(confidence(ident, measure)))
                fh.write("\t".join(cells) + "\n")
    return 0


def cmd_adapt(args) -> int:
    config = read_config(args.config) if args.config else {}
    ms = models.load(args.model)
    dataset = corpus.load_unlabeled(args.input)
    plan = adapt_mod.AdaptPlan(
        k=_resolve(args.k, config, "k", lambda t: _parse_int(t, "k"), 1),
        epochs=_resolve(args.epochs, config, "epochs",
                        lambda t: _parse_int(t, "epochs"), 1),
        measure=ConfidenceMeasure.parse(
            _resolve(args.measure, config, "measure", str, "bs")),
        threshold=_resolve(args.threshold, config, "threshold",
                           _parse_threshold, None),
        epoch_mode=_parse_epoch_mode(
            _resolve(args.epoch_mode, config, "epoch_mode", str, "replace")),
        stop_on_fixed_point=args.stop_on_fixed_point,
    )
    result = adapt_mod.adapt_iterative(ms, dataset, plan)
    with _open_out(args.out) as fh:
        for i in range(len(dataset)):
            fh.write(result.state.finalized[i] + "\n")
    if args.emit_rounds:
        with open(args.emit_rounds, "w", encoding="utf-8", newline="") as fh:
            fh.write("round\tindex\tconfidence\tlabel\tadded\n")
            for entry in result.state.round_log:
                fh.write(f"{entry.round}\t{entry.index}\t{entry.confidence!r}"
                         f"\t{entry.label}\t{int(entry.added)}\n")
    if plan.epochs > 1:
        if result.fixed_point_epoch is not None:
            log.info("fixed point first reached at epoch %d of %d run",
                     result.fixed_point_epoch, result.epochs_run)
        else:
            log.info("no fixed point within %d epochs", result.epochs_run)
    if args.save_model:
        models.save(ms, args.save_model)
    return 0


def cmd_evaluate(args) -> int:
    gold = _load_gold_labels(args.gold)
    predictions = _read_label_lines(args.predictions)
    if args.drop_label:
        gold, predictions = evaluation.filter_labels(gold, predictions,
                                                     args.drop_label)
        if not gold:
            raise DataError("every position was dropped by --drop-label")
    report = evaluation.metrics(gold, predictions)
    sys.stdout.write(evaluation.format_metrics_table(report))
    if args.tsv:
        with open(args.tsv, "w", encoding="utf-8", newline="") as fh:
            fh.write(evaluation.metrics_tsv(report))
    if args.assert_min is not None:
        achieved = report.get(args.objective)
        if achieved < args.assert_min:
            log.error("%s %.4f below required minimum %.4f",
                      args.objective, achieved, args.assert_min)
            return 3
    return 0


def _parse_grid(path: str) -> evaluation.SweepGrid:
    values = read_config(path)
    fields: dict = {}
    if "n_max" in values:
        fields["n_max"] = tuple(_parse_int(v, "n_max")
                                for v in values["n_max"].split(","))
    if "p_mod" in values:
        fields["p_mod"] = tuple(_parse_float(v, "p_mod")
                                for v in values["p_mod"].split(","))
    if "backoff" in values:
        fields["backoff"] = tuple(v.strip() for v in values["backoff"].split(","))
    if "k" in values:
        fields["k"] = tuple(_parse_int(v, "k") for v in values["k"].split(","))
    if "epochs" in values:
        fields["epochs"] = tuple(_parse_int(v, "epochs")
                                 for v in values["epochs"].split(","))
    if "threshold" in values:
        fields["threshold"] = tuple(_parse_threshold(v)
                                    for v in values["threshold"].split(","))
    for key in ("languages", "measure", "epoch_mode", "threads", "objective"):
        if key in values:
            raise ConfigError(f"{path}: {key} is a sweep flag, not a grid axis")
    return evaluation.SweepGrid(**fields)


def cmd_sweep(args) -> int:
    if (args.dev is None) == (args.dev_tail is None):
        raise ConfigError("exactly one of --dev and --dev-tail is required")
    train_ds = corpus.load_labeled(args.train)
    if args.dev is not None:
        dev_ds = corpus.load_labeled(args.dev)
    else:
        train_ds, dev_ds = corpus.split_dev_tail(train_ds, args.dev_tail)
    grid = _parse_grid(args.grid)
    workers = args.threads if args.threads is not None else os.cpu_count() or 1
    result = evaluation.sweep(train_ds, dev_ds, grid,
                              objective=args.objective,
                              measure=ConfidenceMeasure.parse(args.measure),
                              epoch_mode=_parse_epoch_mode(args.epoch_mode),
                              workers=workers)
    sys.stdout.write(evaluation.format_sweep_table(result))
    if args.tsv:
        with open(args.tsv, "w", encoding="utf-8", newline="") as fh:
            fh.write(evaluation.sweep_tsv(result))
    if result.best is None:
        raise DataError("no sweep cell completed successfully")
    if args.assert_min is not None and result.best.objective_value < args.assert_min:
        log.error("best %s %.4f below required minimum %.4f",
                  args.objective, result.best.objective_value, args.assert_min)
        return 3
    return 0


def cmd_calibrate(args) -> int:
    ms = models.load(args.model)
    dataset = corpus.load_labeled(args.gold)
    if len(dataset) == 0:
        raise DataError(f"{args.gold}: empty corpus")
    measure = ConfidenceMeasure.parse(args.confidence)
    idents = scorer.identify_batch(ms, dataset)
    confidences = [confidence(ident, measure) for ident in idents]
    correct = [ident.best == inst.label for ident, inst in zip(idents, dataset)]
    rows = evaluation.decile_report(confidences, correct)
    sys.stdout.write(evaluation.format_decile_table(rows))
    if args.tsv:
        with open(args.tsv, "w", encoding="utf-8", newline="") as fh:
            fh.write(evaluation.deciles_tsv(rows))
    return 0


def cmd_inspect(args) -> int:
    ms = models.load(args.model)
    out = sys.stdout
    out.write(f"format       {models.MODEL_FORMAT_VERSION}\n")
    out.write(f"languages    {' '.join(ms.languages)}\n")
    out.write(f"p_mod        {ms.p_mod!r}\n")
    out.write(f"n_max        {ms.n_max}\n")
    out.write(f"backoff      {' '.join(k.describe() for k in ms.backoff_order)}\n")
    out.write("\n")
    width = max(len(lang) for lang in ms.languages)
    kwidth = max(len(k.describe()) for k in ms.backoff_order)
    out.write(f"{'language':<{max(width, 8)}}  {'kind':<{kwidth}}  "
              f"{'features':>10}  {'total':>12}\n")
    for lang in ms.languages:
        for kind in ms.backoff_order:
            distinct = sum(1 for f in ms.union_domain(kind)
                           if ms.feature_count(lang, kind, f))
            out.write(f"{lang:<{max(width, 8)}}  {kind.describe():<{kwidth}}  "
                      f"{distinct:>10}  {ms.total(lang, kind):>12}\n")
    return 0


def cmd_split_dev(args) -> int:
    dataset = corpus.load_labeled(args.corpus)
    train_ds, dev_ds = corpus.split_dev_tail(dataset, args.tail)
    corpus.write_labeled(train_ds, args.train_out)
    corpus.write_labeled(dev_ds, args.dev_out)
    log.info("split %d instances into %d train + %d dev",
             len(dataset), len(train_ds), len(dev_ds))
    return 0


# ----------------------------------------------------------------------
# parser

def build_parser() -> _Parser:
    parser = _Parser(prog="lidkit",
                     description="Language identification with back-off "
                                 "n-gram scoring and unsupervised adaptation")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("train", help="count models from a labeled corpus")
    p.add_argument("corpus", help="labeled corpus (TEXT<TAB>LABEL per line)")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--languages", help="comma-separated language codes; "
                                       "default: order of first appearance")
    p.add_argument("--n-max", type=int, dest="n_max",
                   help=f"longest char n-gram (default {DEFAULT_N_MAX})")
    p.add_argument("--p-mod", type=float, dest="p_mod",
                   help=f"penalty modifier, >= 1 (default {DEFAULT_P_MOD})")
    p.add_argument("--backoff", help=f"back-off spec (default {DEFAULT_BACKOFF!r})")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("identify", help="label an unlabeled corpus")
    p.add_argument("model")
    p.add_argument("input", help="one text per line")
    p.add_argument("--out", default="-", help="predictions file (default stdout)")
    p.add_argument("--scores", help="write a per-instance score TSV here")
    p.add_argument("--confidence", default="bs", choices=["bs", "avg", "post"],
                   help="confidence measure for the scores TSV")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("adapt", help="adapt models on an unlabeled collection "
                                     "and label it")
    p.add_argument("model")
    p.add_argument("input", help="one text per line")
    p.add_argument("--out", default="-", help="predictions file (default stdout)")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--k", type=int, help="rounds per epoch (default 1)")
    p.add_argument("--epochs", type=int, help="adaptation epochs (default 1)")
    p.add_argument("--measure", choices=["bs", "avg", "post"],
                   help="confidence measure for ranking (default bs)")
    p.add_argument("--threshold", type=_parse_threshold,
                   help="minimum confidence for feature addition; 'none' "
                        "disables the check (default)")
    p.add_argument("--epoch-mode", dest="epoch_mode",
                   choices=list(adapt_mod.EPOCH_MODES),
                   help="reset additions between epochs (replace, default) "
                        "or keep them (accumulate)")
    p.add_argument("--stop-on-fixed-point", action="store_true",
                   help="end the run at the first repeated assignment")
    p.add_argument("--emit-rounds", help="write the round log TSV here")
    p.add_argument("--save-model", help="write the adapted models here")
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("evaluate", help="score predictions against gold labels")
    p.add_argument("gold", help="labeled corpus or one gold label per line")
    p.add_argument("predictions", help="one predicted label per line")
    p.add_argument("--drop-label", action="append", metavar="LABEL",
                   help="drop positions with this gold label (repeatable)")
    p.add_argument("--objective", default="macro_f1",
                   choices=list(evaluation.OBJECTIVES))
    p.add_argument("--assert-min", type=float,
                   help="exit 3 unless the objective reaches this value")
    p.add_argument("--tsv", help="write the per-class report TSV here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="exhaustive parameter sweep on a dev set")
    p.add_argument("train", help="labeled training corpus")
    p.add_argument("--grid", required=True, help="grid file (key = v1,v2,...)")
    p.add_argument("--dev", help="labeled dev corpus")
    p.add_argument("--dev-tail", type=int, dest="dev_tail", metavar="N",
                   help="instead of --dev: split the last N lines per "
                        "language off the training corpus")
    p.add_argument("--objective", default="macro_f1",
                   choices=list(evaluation.OBJECTIVES))
    p.add_argument("--measure", default="bs", choices=["bs", "avg", "post"],
                   help="confidence measure for adapting cells")
    p.add_argument("--epoch-mode", dest="epoch_mode", default="replace",
                   choices=list(adapt_mod.EPOCH_MODES))
    p.add_argument("--threads", type=int,
                   help="worker processes for cells (default: all cores)")
    p.add_argument("--tsv", help="write the sweep table TSV here")
    p.add_argument("--assert-min", type=float,
                   help="exit 3 unless the best objective reaches this value")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="confidence decile accuracy report")
    p.add_argument("model")
    p.add_argument("gold", help="labeled corpus")
    p.add_argument("--confidence", default="bs", choices=["bs", "avg", "post"])
    p.add_argument("--tsv", help="write the decile report TSV here")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("inspect", help="dump model header and cardinalities")
    p.add_argument("model")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("split-dev", help="hold out the last N lines per language")
    p.add_argument("corpus", help="labeled corpus")
    p.add_argument("--tail", type=int, required=True, metavar="N")
    p.add_argument("--train-out", required=True, dest="train_out")
    p.add_argument("--dev-out", required=True, dest="dev_out")
    p.set_defaults(func=cmd_split_dev)

    parser.set_defaults(func=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.func is None:
            parser.print_help(sys.stderr)
            return 1
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
