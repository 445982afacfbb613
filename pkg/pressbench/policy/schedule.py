"""Squared-cosine noise schedule and the forward noising process."""
import math
from typing import Tuple, Union

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict

from pressbench.errors import ConfigurationError, DomainError

MAX_BETA = 0.999
COSINE_OFFSET = 0.008

ArrayLike = Union[np.ndarray, torch.Tensor, float]


class NoiseSchedule(BaseModel):
    """``alpha_bar`` has T + 1 entries (index 0 is the clean sample); ``betas`` has T."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    T: int
    betas: np.ndarray
    alpha_bar: np.ndarray

    def alpha(self, t: int) -> float:
        return 1.0 - float(self.betas[t - 1])

    def beta(self, t: int) -> float:
        return float(self.betas[t - 1])

    def posterior_variance(self, t: int) -> float:
        """Variance of q(a_{t-1} | a_t, a_0)."""
        return (1.0 - self.alpha_bar[t - 1]) / (1.0 - self.alpha_bar[t]) * self.beta(t)

    def posterior_coefficients(self, t: int) -> Tuple[float, float]:
        """Weights of a_0 and a_t in the mean of q(a_{t-1} | a_t, a_0)."""
        ab_t, ab_prev = float(self.alpha_bar[t]), float(self.alpha_bar[t - 1])
        start = math.sqrt(ab_prev) * self.beta(t) / (1.0 - ab_t)
        current = math.sqrt(self.alpha(t)) * (1.0 - ab_prev) / (1.0 - ab_t)
        return start, current

    def check_timestep(self, t) -> None:
        t = np.asarray(t.cpu() if isinstance(t, torch.Tensor) else t)
        if t.size and (t.min() < 1 or t.max() > self.T):
            raise DomainError(f"diffusion timestep must lie in [1, {self.T}] (got {t.min()}..{t.max()})")


def make_schedule(T: int = 50, s: float = COSINE_OFFSET) -> NoiseSchedule:
    """Squared-cosine schedule with T steps.

    ``alpha_bar`` follows cos^2(((t/T + s) / (1 + s)) pi/2), normalized to 1 at
    t = 0. Betas are clipped to 0.999 and ``alpha_bar`` is then recomputed as
    their cumulative product so the two stay consistent.
    """
    if T < 1:
        raise ConfigurationError(f"diffusion needs T >= 1 (got {T})")
    t = np.arange(T + 1, dtype=np.float64)
    f = np.cos(((t / T + s) / (1.0 + s)) * math.pi / 2.0) ** 2
    raw = f / f[0]
    betas = np.clip(1.0 - raw[1:] / raw[:-1], 0.0, MAX_BETA)
    alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
    return NoiseSchedule(T=T, betas=betas, alpha_bar=alpha_bar)


def q_sample(schedule: NoiseSchedule, a0: ArrayLike, t, eps: ArrayLike):
    """Forward-noise ``a0`` to step ``t``: sqrt(ab_t) a0 + sqrt(1 - ab_t) eps.

    Works on numpy arrays (scalar ``t``) and on torch batches (``t`` of shape (B,)).
    """
    schedule.check_timestep(t)
    if isinstance(a0, torch.Tensor):
        alpha_bar = torch.as_tensor(schedule.alpha_bar, dtype=a0.dtype)[torch.as_tensor(t).long()]
        while alpha_bar.dim() < a0.dim():
            alpha_bar = alpha_bar.unsqueeze(-1)
        return alpha_bar.sqrt() * a0 + (1.0 - alpha_bar).sqrt() * eps
    alpha_bar = schedule.alpha_bar[t]
    return math.sqrt(alpha_bar) * np.asarray(a0, dtype=np.float64) + math.sqrt(1.0 - alpha_bar) * np.asarray(
        eps, dtype=np.float64
    )
