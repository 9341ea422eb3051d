"""Numpy CNN library with hand-written backpropagation."""

from .layers import BatchNorm, Conv2D, Dense, GlobalAvgPool, MaxPool2x2, ReLU, glorot_uniform_init, softmax
from .losses import class_balanced_alpha, focal_loss
from .model import DEFAULT_CHANNELS, ArchitectureSpec, Model
from .optim import AdamState, adam_step
from .train import ArrayDataset, TrainConfig, TrainResult, accuracy, train

__all__ = [
    "AdamState",
    "ArchitectureSpec",
    "ArrayDataset",
    "BatchNorm",
    "Conv2D",
    "DEFAULT_CHANNELS",
    "Dense",
    "GlobalAvgPool",
    "MaxPool2x2",
    "Model",
    "ReLU",
    "TrainConfig",
    "TrainResult",
    "accuracy",
    "adam_step",
    "class_balanced_alpha",
    "focal_loss",
    "glorot_uniform_init",
    "softmax",
    "train",
]
