"""Language and dialect identification with back-off n-gram scoring and
unsupervised, confidence-ranked language-model adaptation."""

from lidkit.adapt import (AdaptPlan, AdaptResult, AdaptState, RoundEntry,
                          adapt_epoch, adapt_iterative, fixed_point_detect)
from lidkit.confidence import (ConfidenceMeasure, cm_avg, cm_bs, cm_post,
                               confidence)
from lidkit.corpus import (SCHEMES, Dataset, Instance, PreprocScheme,
                           extract_char_ngrams, load_labeled, load_unlabeled,
                           split_dev_tail, tokenize, write_labeled,
                           write_unlabeled)
from lidkit.errors import (ConfigError, ConsistencyError, DataError,
                           LidkitError, ModelFormatError, ParseError,
                           TrainingError)
from lidkit.evaluation import (ConfusionMatrix, DecileRow, MetricReport,
                               SweepGrid, SweepResult, decile_report,
                               filter_labels, metrics, sweep)
from lidkit.models import (FeatureKind, ModelSet, derive_languages,
                           expand_backoff, load, parse_kind, save, train)
from lidkit.scorer import (Identification, ScoreCounters, identify_batch,
                           score_text, score_word)

__version__ = "0.1.0"
