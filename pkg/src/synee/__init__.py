"""Syntax-enhanced Chinese event extraction.

Sequence taggers that fuse a contextual encoder with a POS embedding channel
and a dependency-parse graph-convolution channel, trained pipelined for
trigger and argument-role labeling over BIOE tags, and scored with
token-level precision/recall/F1.
"""

from .align import FeatureEncoder, FeatureSpace, LabelScheme
from .annotate import Annotator, SyntaxAnnotation, ToyAnnotator, VocabTable
from .corpus import (
    ArgumentRecord,
    EventRecord,
    EventSchema,
    RawSentence,
    load_schema,
    load_sentences,
    resplit_dev,
)
from .metrics import MatchCounts, MetricsReport, prf, score_dataset
from .model import EventTagger, ModelVariant
from .pipeline import assemble_events, predict_events, run_ablation

__version__ = "0.1.0"

__all__ = [
    "Annotator",
    "ArgumentRecord",
    "EventRecord",
    "EventSchema",
    "EventTagger",
    "FeatureEncoder",
    "FeatureSpace",
    "LabelScheme",
    "MatchCounts",
    "MetricsReport",
    "ModelVariant",
    "RawSentence",
    "SyntaxAnnotation",
    "ToyAnnotator",
    "VocabTable",
    "assemble_events",
    "load_schema",
    "load_sentences",
    "predict_events",
    "prf",
    "resplit_dev",
    "run_ablation",
    "score_dataset",
    "__version__",
]
