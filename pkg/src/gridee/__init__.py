"""One-stage overlapped and nested event extraction by word-pair grid tagging."""

from .codec import LabelGrid, RoleStrategy, ScoreGrid, decode, encode, oracle_decode
from .events import (
    Argument,
    Corpus,
    EventRecord,
    GenConfig,
    Schema,
    Sentence,
    Span,
    gen_synthetic,
    load_jsonl,
    save_jsonl,
    validate,
)
from .metrics import EvalReport, bench, evaluate, predict, predict_corpus
from .model import GridEE, ModelConfig
from .trainer import LossConfig, TrainConfig, train

__version__ = "0.1.0"
