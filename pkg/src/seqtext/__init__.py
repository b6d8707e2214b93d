"""Recurrent text classifiers (RNN / LSTM / GRU) on plain numpy.

The package covers the whole path from raw labeled text to scored
predictions: cleaning and vocabulary building, trainable embeddings,
three recurrent cells with exact hand-derived gradients, a dense + head
classifier, mini-batch training with SGD / RMSProp / Adam, and
confusion-matrix metrics. Everything is deterministic under a seed.
"""

from .cells import GruParams, LstmParams, RnnParams, make_cell, run_sequence
from .embedding import EmbeddingMatrix, embedding_dim_heuristic, load_pretrained
from .engine import (Checkpoint, Dataset, ExperimentConfig, LearningCurve,
                     build_model, corpus_stats, emit_learning_curve, evaluate,
                     load_checkpoint, load_csv_dataset, load_dataset,
                     make_synthetic_corpus, make_synthetic_csv, save_checkpoint,
                     save_dataset, split, train)
from .errors import (ConfigError, DataError, DivergenceError, IntegrityError,
                     ShapeError, VocabularyMismatchError)
from .metrics import EvalReport, confusion, format_report, scores
from .model import ClassifierModel, bce_loss, cce_loss, cost, forward, softmax
from .pipeline import (PipelineConfig, TokenizedDocument, Vocabulary,
                       build_vocabulary, clean, encode, make_document)

__version__ = "0.1.0"

__all__ = [
    "GruParams", "LstmParams", "RnnParams", "make_cell", "run_sequence",
    "EmbeddingMatrix", "embedding_dim_heuristic", "load_pretrained",
    "Checkpoint", "Dataset", "ExperimentConfig", "LearningCurve",
    "build_model", "corpus_stats", "emit_learning_curve", "evaluate", "load_checkpoint",
    "load_csv_dataset", "load_dataset", "make_synthetic_corpus",
    "make_synthetic_csv", "save_checkpoint", "save_dataset", "split", "train",
    "ConfigError", "DataError", "DivergenceError", "IntegrityError",
    "ShapeError", "VocabularyMismatchError",
    "EvalReport", "confusion", "format_report", "scores",
    "ClassifierModel", "bce_loss", "cce_loss", "cost", "forward", "softmax",
    "PipelineConfig", "TokenizedDocument", "Vocabulary",
    "build_vocabulary", "clean", "encode", "make_document",
    "__version__",
]
