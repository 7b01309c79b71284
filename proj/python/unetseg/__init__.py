"""Encoder-decoder segmentation network with a supervised bottleneck head.

Thin wrapper over the C++ core. All heavy lifting happens in `_core`;
arrays cross the boundary as numpy float64 / int32.
"""

from ._core import (
    ConfigError,
    ConfusionCounts,
    DecodeError,
    Model,
    NumericDivergenceError,
    ShapeError,
    TrainConfig,
    UNetConfig,
    ValidationError,
    __version__,
    accuracy,
    confusion,
    downsample_labels,
    evaluate,
    generate_dataset,
    generate_phantom,
    gradcheck,
    l1_loss,
    load_checkpoint,
    load_dataset,
    load_sample,
    pixelwise_cross_entropy,
    save_checkpoint,
    save_sample,
    sensitivity,
    specificity,
    train,
)

__all__ = [
    "ConfigError",
    "ConfusionCounts",
    "DecodeError",
    "Model",
    "NumericDivergenceError",
    "ShapeError",
    "TrainConfig",
    "UNetConfig",
    "ValidationError",
    "__version__",
    "accuracy",
    "confusion",
    "downsample_labels",
    "evaluate",
    "generate_dataset",
    "generate_phantom",
    "gradcheck",
    "l1_loss",
    "load_checkpoint",
    "load_dataset",
    "load_sample",
    "pixelwise_cross_entropy",
    "save_checkpoint",
    "save_sample",
    "sensitivity",
    "specificity",
    "train",
]
