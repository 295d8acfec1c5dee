"""Differentiable core: autodiff, message-passing models, losses, optimizer."""

from .autodiff import Tensor
from .io import load_weights, save_weights
from .losses import LossBreakdown, bce_mean, diffusion_losses, time_loss
from .model import (
    ModelWeights,
    SwapScores,
    VARIANT_BASE,
    VARIANT_FPS,
    as_tensors,
    count_parameters,
    diffusion_forward,
    expected_shapes,
    fps_forward,
    from_tensors,
    gine_forward,
    init_weights,
    time_forward,
)
from .optim import Adam, backward_and_step

__all__ = [
    "Adam",
    "LossBreakdown",
    "ModelWeights",
    "SwapScores",
    "Tensor",
    "VARIANT_BASE",
    "VARIANT_FPS",
    "as_tensors",
    "backward_and_step",
    "bce_mean",
    "count_parameters",
    "diffusion_forward",
    "diffusion_losses",
    "expected_shapes",
    "fps_forward",
    "from_tensors",
    "gine_forward",
    "init_weights",
    "load_weights",
    "save_weights",
    "time_forward",
    "time_loss",
]
