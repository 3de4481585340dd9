"""Convolutional network, training loop and checkpoints."""
from .checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckResult, check_random_architecture, gradient_check, rel_error
from .model import CnnArchitecture, CnnModel, backward, forward, init_model
from .train import TrainConfig, evaluate_loss, predict, predict_proba, temporal_split, train

__all__ = [
    "CnnArchitecture", "CnnModel", "GradCheckResult", "TrainConfig", "backward",
    "check_random_architecture", "decode_checkpoint", "encode_checkpoint", "evaluate_loss",
    "forward", "gradient_check", "init_model", "load_checkpoint", "predict", "predict_proba",
    "rel_error", "save_checkpoint", "temporal_split", "train",
]
