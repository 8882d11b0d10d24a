"""Minimal numpy neural engine: stacked LSTM, MLP, softmax cross-entropy, SGD."""

from .config import TrainConfig
from .losses import softmax, softmax_cross_entropy
from .lstm import LstmLayer, LstmModel, extract_embedding, init_lstm, lstm_forward
from .mlp import DenseLayer, MlpModel, init_mlp, mlp_forward
from .training import TrainResult, train_mlp, train_sequence_model
from .checkpoint import load_model, save_model

__all__ = [
    "DenseLayer",
    "LstmLayer",
    "LstmModel",
    "MlpModel",
    "TrainConfig",
    "TrainResult",
    "extract_embedding",
    "init_lstm",
    "init_mlp",
    "load_model",
    "lstm_forward",
    "mlp_forward",
    "save_model",
    "softmax",
    "softmax_cross_entropy",
    "train_mlp",
    "train_sequence_model",
]
