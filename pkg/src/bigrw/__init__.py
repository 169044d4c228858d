"""Bidirectional group random walk node embeddings (BiGRW / BiGRW-AT)."""

__version__ = "0.1.0"

from .evaluation import (
    LabelSet,
    OneVsRestLogisticRegression,
    evaluate_classification,
    evaluate_clustering,
    kmeans,
    macro_f1,
    mcc_multiclass,
    micro_f1,
    nmi,
    purity,
)
from .graph import Graph, from_edge_list, sample_step, transition_distribution
from .io import load_dataset, read_edge_list, read_embeddings, read_labels, write_embeddings
from .kwat import hop_weights, kwat_matrix
from .model import BiGRW, ModelParams, TrainConfig, train
from .walks import WalkConfig, sample_pair

__all__ = [
    "BiGRW", "Graph", "LabelSet", "ModelParams", "OneVsRestLogisticRegression", "TrainConfig",
    "WalkConfig", "evaluate_classification", "evaluate_clustering", "from_edge_list", "hop_weights",
    "kmeans", "kwat_matrix", "load_dataset", "macro_f1", "mcc_multiclass", "micro_f1", "nmi",
    "purity", "read_edge_list", "read_embeddings", "read_labels", "sample_pair", "sample_step",
    "train", "transition_distribution", "write_embeddings",
]
