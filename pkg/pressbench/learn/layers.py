"""Fixed layer vocabulary, built from JSON layer specs.

A layer spec is a list of dicts such as ``{"type": "affine", "in": 64, "out": 2}``.
Specs are stored verbatim in checkpoints so a module can be rebuilt before its
parameters are loaded.
"""
from collections import OrderedDict
from typing import Dict, List, Sequence

import torch
import torch.nn as nn
from torch import Tensor

from pressbench.errors import ConfigurationError, ShapeError


class Concat(nn.Module):
    """Concatenate inputs along the last dimension."""

    def forward(self, *inputs: Tensor) -> Tensor:
        return torch.cat(inputs, dim=-1)


class Tokens(nn.Module):
    """Feature map (B, C, H, W) to token sequence (B, H*W, C)."""

    def forward(self, x: Tensor) -> Tensor:
        return x.flatten(2).transpose(1, 2)


class PositionalEmbedding(nn.Module):
    """Learned additive position embedding for a fixed token count."""

    def __init__(self, tokens: int, dim: int):
        super().__init__()
        self.weight = nn.Parameter(torch.zeros(1, tokens, dim))
        nn.init.normal_(self.weight, std=0.02)

    def forward(self, x: Tensor) -> Tensor:
        return x + self.weight


class MeanPool(nn.Module):
    """Average over the token dimension."""

    def forward(self, x: Tensor) -> Tensor:
        return x.mean(dim=1)


class AttentionBlock(nn.Module):
    """Pre-norm transformer block: self-attention and a GELU MLP, both residual."""

    def __init__(self, dim: int, heads: int = 4, mlp_ratio: int = 4):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, heads, dropout=0.0, batch_first=True)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, dim * mlp_ratio),
            nn.GELU(),
            nn.Linear(dim * mlp_ratio, dim),
        )

    def forward(self, x: Tensor) -> Tensor:
        h = self.norm1(x)
        x = x + self.attn(h, h, h, need_weights=False)[0]
        return x + self.mlp(self.norm2(x))


def make_layer(spec: Dict) -> nn.Module:
    """Instantiate one layer of the vocabulary."""
    kind = spec.get("type")
    if kind == "affine":
        return nn.Linear(spec["in"], spec["out"])
    if kind == "conv2d":
        kernel = spec.get("kernel", 3)
        return nn.Conv2d(
            spec["in"],
            spec["out"],
            kernel_size=kernel,
            stride=spec.get("stride", 1),
            padding=spec.get("padding", kernel // 2 if kernel == 3 else 0),
        )
    if kind == "relu":
        return nn.ReLU()
    if kind == "gelu":
        return nn.GELU()
    if kind == "layernorm":
        return nn.LayerNorm(spec["dim"])
    if kind == "attention":
        return AttentionBlock(spec["dim"], heads=spec.get("heads", 4))
    if kind == "flatten":
        return nn.Flatten()
    if kind == "concat":
        return Concat()
    if kind == "tokens":
        return Tokens()
    if kind == "pos_embed":
        return PositionalEmbedding(spec["tokens"], spec["dim"])
    if kind == "meanpool":
        return MeanPool()
    raise ConfigurationError(f"unknown layer type {kind!r}")


class LayerStack(nn.Sequential):
    """Sequential module that remembers its layer spec and input shape."""

    def __init__(self, spec: Sequence[Dict], input_shape: Sequence[int]):
        layers = OrderedDict((f"l{i}_{s['type']}", make_layer(s)) for i, s in enumerate(spec))
        super().__init__(layers)
        self.spec: List[Dict] = [dict(s) for s in spec]
        self.input_shape = tuple(input_shape)

    def check_input(self, x: Tensor) -> None:
        if tuple(x.shape[1:]) != self.input_shape:
            first = next(iter(self._modules), "<empty>")
            raise ShapeError(
                f"layer {first}: expected input (*, {', '.join(map(str, self.input_shape))}), "
                f"got {tuple(x.shape)}"
            )

    def forward(self, x: Tensor) -> Tensor:
        self.check_input(x)
        for name, layer in self._modules.items():
            try:
                x = layer(x)
            except RuntimeError as e:
                raise ShapeError(f"layer {name}: {e}") from e
        return x


def build_layers(spec: Sequence[Dict], input_shape: Sequence[int]) -> LayerStack:
    """Build a LayerStack from a JSON-compatible spec."""
    return LayerStack(spec, input_shape)
