"""Adam with coupled weight decay and the warmup-cosine learning-rate schedule."""
import math
from typing import Iterable, Optional, Union

import torch
from pydantic import BaseModel, ConfigDict, model_validator

from pressbench.errors import ConfigurationError


class AdamConfig(BaseModel):
    """Optimizer hyperparameters."""

    model_config = ConfigDict(frozen=True)

    lr: float = 1e-4
    weight_decay: float = 1e-6
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class LrSchedule(BaseModel):
    """Linear warmup followed by a half-cosine decay to zero."""

    model_config = ConfigDict(frozen=True)

    base_lr: float
    warmup_steps: int = 500
    total_steps: int

    @model_validator(mode="after")
    def _validate(self) -> "LrSchedule":
        if not 0 < self.warmup_steps < self.total_steps:
            raise ConfigurationError(
                f"0 < warmup_steps < total_steps violated ({self.warmup_steps}, {self.total_steps})"
            )
        return self


def lr_at(schedule: LrSchedule, step: int) -> float:
    """Learning rate at an optimizer step; zero past ``total_steps``."""
    if step > schedule.total_steps:
        return 0.0
    if step < schedule.warmup_steps:
        return schedule.base_lr * step / schedule.warmup_steps
    progress = (step - schedule.warmup_steps) / (schedule.total_steps - schedule.warmup_steps)
    return schedule.base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def fit_schedule(base_lr: float, warmup_steps: int, total_steps: int) -> Optional[LrSchedule]:
    """Schedule for a run of ``total_steps``; the warmup shrinks for short runs.

    Returns None when the run is too short for any warmup (constant rate).
    """
    if total_steps < 2:
        return None
    if warmup_steps >= total_steps:
        warmup_steps = max(1, total_steps // 10)
    return LrSchedule(base_lr=base_lr, warmup_steps=warmup_steps, total_steps=total_steps)


def make_adam(params: Union[Iterable[torch.Tensor], Iterable[dict]], cfg: AdamConfig) -> torch.optim.Adam:
    """Adam with L2 weight decay added to the gradient (torch's coupled form)."""
    return torch.optim.Adam(
        params,
        lr=cfg.lr,
        betas=(cfg.beta1, cfg.beta2),
        eps=cfg.eps,
        weight_decay=cfg.weight_decay,
        foreach=False,
    )


def adam_step(optimizer: torch.optim.Adam, lr: float) -> None:
    """Apply one Adam update at learning rate ``lr`` to every parameter group.

    Groups carrying an ``lr_scale`` entry are updated at ``lr * lr_scale``.
    """
    for group in optimizer.param_groups:
        group["lr"] = lr * group.get("lr_scale", 1.0)
    optimizer.step()
