"""Seeded training loops."""
import logging
import math
from typing import Callable, List, Optional, Sequence, Union

import torch
import torch.nn as nn
from pydantic import BaseModel, ConfigDict
from torch.utils.data import DataLoader, Dataset

from pressbench.errors import ConfigurationError, TrainingDivergedError
from pressbench.learn.optim import AdamConfig, LrSchedule, adam_step, fit_schedule, lr_at, make_adam

logger = logging.getLogger(__name__)

LossFn = Callable[[nn.Module, Sequence[torch.Tensor]], torch.Tensor]


def seed_torch(seed: int) -> torch.Generator:
    """Seed torch's global RNG and return a dedicated generator."""
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True, warn_only=True)
    return torch.Generator().manual_seed(seed)


class Trainer:
    """Owns the optimizer and schedule; applies one guarded update per loss.

    Args:
        params: Parameters, or param groups with an optional ``lr_scale``
        adam: Optimizer hyperparameters
        schedule: Warmup-cosine schedule; constant ``adam.lr`` when None
    """

    def __init__(
        self,
        params: Union[Sequence[torch.Tensor], Sequence[dict]],
        adam: AdamConfig,
        schedule: Optional[LrSchedule] = None,
    ):
        self.adam = adam
        self.schedule = schedule
        self.optimizer = make_adam(params, adam)
        self.step_index = 0

    @property
    def lr(self) -> float:
        return lr_at(self.schedule, self.step_index) if self.schedule else self.adam.lr

    def step(self, loss: torch.Tensor) -> float:
        value = loss.item()
        if not math.isfinite(value):
            logger.error(f"Training diverged at step {self.step_index} (lr={self.lr:.3e})")
            raise TrainingDivergedError(self.step_index, self.lr, value)
        self.optimizer.zero_grad(set_to_none=True)
        loss.backward()
        adam_step(self.optimizer, self.lr)
        self.step_index += 1
        return value


class TrainResult(BaseModel):
    """Per-epoch mean losses of a training run."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    module: nn.Module
    loss_curve: List[float]
    steps: int


def train_epochs(
    module: nn.Module,
    dataset: Dataset,
    loss_fn: LossFn,
    adam: AdamConfig,
    epochs: int,
    seed: int,
    batch_size: int = 64,
    warmup_steps: int = 500,
    param_groups: Optional[Sequence[dict]] = None,
) -> TrainResult:
    """Train ``module`` for a number of epochs over a shuffled dataset.

    Args:
        module: Module to train in place
        dataset: Map-style dataset; items are tuples of tensors
        loss_fn: ``loss_fn(module, batch) -> scalar``
        adam: Optimizer hyperparameters (``adam.lr`` is the base rate)
        epochs: Number of passes; 0 leaves the module untouched
        seed: Seeds shuffling and any torch randomness
        batch_size: Minibatch size
        warmup_steps: Warmup of the cosine schedule
        param_groups: Explicit param groups (default: all trainable parameters)

    Returns:
        TrainResult with the per-epoch mean loss
    """
    if len(dataset) == 0:
        raise ConfigurationError("cannot train on an empty dataset")
    if epochs <= 0:
        return TrainResult(module=module, loss_curve=[], steps=0)

    generator = seed_torch(seed)
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=True, generator=generator)
    total = epochs * len(loader)
    params = param_groups or [p for p in module.parameters() if p.requires_grad]
    trainer = Trainer(params, adam, fit_schedule(adam.lr, warmup_steps, total))

    module.train()
    curve: List[float] = []
    for epoch in range(epochs):
        losses = [trainer.step(loss_fn(module, batch)) for batch in loader]
        curve.append(sum(losses) / len(losses))
        logger.info(f"Epoch {epoch + 1}/{epochs}: loss={curve[-1]:.5f} lr={trainer.lr:.2e}")
    module.eval()
    return TrainResult(module=module, loss_curve=curve, steps=trainer.step_index)
