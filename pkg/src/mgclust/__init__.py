"""Multilayer graph clustering with attention graph autoencoders, contrastive
embedding fusion, and self-supervised cluster refinement."""

from .data import (
    GraphLayer,
    MultilayerGraph,
    NormalizedLayer,
    build_second_attribute_view,
    drop_layer,
    load_multilayer_graph,
    normalize_layer,
    save_multilayer_graph,
    with_similarity_view,
)
from .errors import DatasetError, NumericalError
from .losses import FusionWeights
from .metrics import accuracy, ari, clustering_report, macro_f1, nmi
from .model import EncoderState, init_encoder_state, load_checkpoint, save_checkpoint
from .training import TrainConfig, TrainedModel, predict_labels, pretrain, train

__version__ = "0.1.0"

__all__ = [
    "DatasetError",
    "EncoderState",
    "FusionWeights",
    "GraphLayer",
    "MultilayerGraph",
    "NormalizedLayer",
    "NumericalError",
    "TrainConfig",
    "TrainedModel",
    "accuracy",
    "ari",
    "build_second_attribute_view",
    "clustering_report",
    "drop_layer",
    "init_encoder_state",
    "load_checkpoint",
    "load_multilayer_graph",
    "macro_f1",
    "nmi",
    "normalize_layer",
    "predict_labels",
    "pretrain",
    "save_checkpoint",
    "save_multilayer_graph",
    "train",
    "with_similarity_view",
]
