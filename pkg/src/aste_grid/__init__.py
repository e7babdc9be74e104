"""Aspect sentiment triplet extraction with grid tagging and a dependency-graph encoder."""

from .corpus import (AnnotatedSentence, DatasetSplit, DependencyArc, Sentence, Span, Triplet,
                     dataset_stats, generate_synthetic, load_dataset, load_sentences,
                     save_dataset, save_sentences, validate)
from .grid import GridTag, TagGrid, decode_grid, encode_grid, oracle_decode, triplet_metrics
from .train import (TrainConfig, evaluate, forward, init_model, load_checkpoint, predict,
                    save_checkpoint, train_loop)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedSentence", "DatasetSplit", "DependencyArc", "Sentence", "Span", "Triplet",
    "dataset_stats", "generate_synthetic", "load_dataset", "load_sentences", "save_dataset",
    "save_sentences", "validate", "GridTag", "TagGrid", "decode_grid", "encode_grid",
    "oracle_decode", "triplet_metrics", "TrainConfig", "evaluate", "forward", "init_model",
    "load_checkpoint", "predict", "save_checkpoint", "train_loop",
]
