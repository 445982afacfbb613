"""Noise-prediction network for 3-dim, horizon-1 actions."""
import math
from typing import Dict, List, Optional

import torch
import torch.nn as nn
from torch import Tensor

from pressbench.learn.layers import LayerStack, build_layers

ACTION_DIM = 3


class SinusoidalTimeEmbedding(nn.Module):
    """Fixed sin/cos embedding of the diffusion timestep."""

    def __init__(self, dim: int):
        super().__init__()
        self.dim = dim

    def forward(self, t: Tensor) -> Tensor:
        half = self.dim // 2
        scale = math.log(10000) / (half - 1)
        freqs = torch.exp(torch.arange(half, dtype=torch.float32) * -scale)
        angles = t.float().unsqueeze(-1) * freqs.unsqueeze(0)
        return torch.cat((angles.sin(), angles.cos()), dim=-1)


def denoiser_spec(cond_dim: int, hidden: int = 256, time_dim: int = 32) -> List[Dict]:
    return [
        {"type": "affine", "in": ACTION_DIM + time_dim + cond_dim, "out": hidden},
        {"type": "gelu"},
        {"type": "affine", "in": hidden, "out": hidden},
        {"type": "gelu"},
        {"type": "affine", "in": hidden, "out": ACTION_DIM},
    ]


class Denoiser(nn.Module):
    """MLP on [noisy action | timestep embedding | conditioning] predicting the noise."""

    def __init__(self, cond_dim: int, hidden: int = 256, time_dim: int = 32, spec: Optional[List[Dict]] = None):
        super().__init__()
        self.cond_dim = cond_dim
        self.time_dim = time_dim
        self.time_embedding = SinusoidalTimeEmbedding(time_dim)
        self.net: LayerStack = build_layers(
            spec or denoiser_spec(cond_dim, hidden, time_dim), (ACTION_DIM + time_dim + cond_dim,)
        )

    def forward(self, noisy: Tensor, t: Tensor, cond: Tensor) -> Tensor:
        return self.net(torch.cat([noisy, self.time_embedding(t), cond], dim=-1))
