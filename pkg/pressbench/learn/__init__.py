"""Differentiable building blocks, optimizer, schedule, and checkpoints."""
from pressbench.learn.checkpoint import load_checkpoint, load_into, save_checkpoint
from pressbench.learn.gradcheck import GradCheckResult, finite_difference_check
from pressbench.learn.layers import LayerStack, build_layers, make_layer
from pressbench.learn.optim import AdamConfig, LrSchedule, adam_step, fit_schedule, lr_at, make_adam
from pressbench.learn.tape import GradientTape, backward, forward
from pressbench.learn.trainer import Trainer, TrainResult, seed_torch, train_epochs

__all__ = [
    "AdamConfig",
    "GradCheckResult",
    "GradientTape",
    "LayerStack",
    "LrSchedule",
    "TrainResult",
    "Trainer",
    "adam_step",
    "backward",
    "build_layers",
    "finite_difference_check",
    "fit_schedule",
    "forward",
    "load_checkpoint",
    "load_into",
    "lr_at",
    "make_adam",
    "make_layer",
    "save_checkpoint",
    "seed_torch",
    "train_epochs",
]
