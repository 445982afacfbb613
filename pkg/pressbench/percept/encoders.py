"""Vision and audio encoders."""
import logging
from typing import Dict, List, Optional

import numpy as np
import torch
import torch.nn as nn
from torch import Tensor

from pressbench.errors import ShapeError
from pressbench.learn.layers import LayerStack, build_layers

logger = logging.getLogger(__name__)

FEATURE_DIM = 64
CROP_SIZE = 86
SPEC_FRAMES = 298
SPEC_MELS = 128


def vision_spec(crop: int = CROP_SIZE, dim: int = FEATURE_DIM) -> List[Dict]:
    """Four stride-2 3x3 convolutions, then a dense projection of the flattened map."""
    side = crop
    for _ in range(4):
        side = (side + 2 - 3) // 2 + 1
    return [
        {"type": "conv2d", "in": 3, "out": 16, "stride": 2},
        {"type": "relu"},
        {"type": "conv2d", "in": 16, "out": 32, "stride": 2},
        {"type": "relu"},
        {"type": "conv2d", "in": 32, "out": 32, "stride": 2},
        {"type": "relu"},
        {"type": "conv2d", "in": 32, "out": 64, "stride": 2},
        {"type": "relu"},
        {"type": "flatten"},
        {"type": "affine", "in": 64 * side * side, "out": dim},
    ]


def audio_body_spec(
    frames: int = SPEC_FRAMES, mels: int = SPEC_MELS, dim: int = FEATURE_DIM, blocks: int = 2
) -> List[Dict]:
    """Patch embedding (16x16, stride 10), position embedding, attention blocks, mean pool."""
    tokens = ((frames - 16) // 10 + 1) * ((mels - 16) // 10 + 1)
    spec: List[Dict] = [
        {"type": "conv2d", "in": 1, "out": dim, "kernel": 16, "stride": 10, "padding": 0},
        {"type": "tokens"},
        {"type": "pos_embed", "tokens": tokens, "dim": dim},
    ]
    spec += [{"type": "attention", "dim": dim, "heads": 4} for _ in range(blocks)]
    spec += [{"type": "layernorm", "dim": dim}, {"type": "meanpool"}]
    return spec


def head_spec(classes: int, dim: int = FEATURE_DIM) -> List[Dict]:
    return [{"type": "affine", "in": dim, "out": classes}]


class VisionEncoder(nn.Module):
    """Maps a cropped RGB image (3 x 86 x 86, values in [0, 1]) to a 64-dim feature."""

    def __init__(self, spec: Optional[List[Dict]] = None, crop: int = CROP_SIZE):
        super().__init__()
        self.body: LayerStack = build_layers(spec or vision_spec(crop), (3, crop, crop))

    @property
    def spec(self) -> List[Dict]:
        return self.body.spec

    def forward(self, images: Tensor) -> Tensor:
        return self.body(images)


class AudioEncoder(nn.Module):
    """Spectrogram transformer: normalized (298 x 128) spectrogram to embedding to class logits."""

    def __init__(
        self,
        classes: int,
        body: Optional[List[Dict]] = None,
        head: Optional[List[Dict]] = None,
    ):
        super().__init__()
        self.classes = classes
        self.body: LayerStack = build_layers(body or audio_body_spec(), (1, SPEC_FRAMES, SPEC_MELS))
        self.head: LayerStack = build_layers(head or head_spec(classes), (FEATURE_DIM,))

    def reset_head(self, classes: int) -> None:
        """Replace the class head with a freshly initialized one."""
        self.classes = classes
        self.head = build_layers(head_spec(classes), (FEATURE_DIM,))

    @staticmethod
    def _as_input(specs: Tensor) -> Tensor:
        if specs.dim() == 2:
            specs = specs.unsqueeze(0)
        if specs.dim() == 3:
            specs = specs.unsqueeze(1)
        if tuple(specs.shape[-2:]) != (SPEC_FRAMES, SPEC_MELS):
            raise ShapeError(
                f"audio encoder expects ({SPEC_FRAMES}, {SPEC_MELS}) spectrograms, got {tuple(specs.shape)}"
            )
        return specs

    def embed(self, specs: Tensor) -> Tensor:
        """Mean-pooled penultimate representation, (B, 64)."""
        return self.body(self._as_input(specs))

    def forward(self, specs: Tensor) -> Tensor:
        return self.head(self.embed(specs))


def image_tensor(images: np.ndarray) -> Tensor:
    """(N, H, W, 3) uint8 or float images to a float (N, 3, H, W) tensor in [0, 1]."""
    images = np.asarray(images)
    if images.ndim == 3:
        images = images[None]
    if images.dtype == np.uint8:
        images = images.astype(np.float32) / 255.0
    return torch.from_numpy(np.ascontiguousarray(images, dtype=np.float32)).permute(0, 3, 1, 2)


@torch.no_grad()
def encode_image(encoder: VisionEncoder, image: np.ndarray) -> np.ndarray:
    """64-dim feature of one center-cropped 86 x 86 x 3 image."""
    image = np.asarray(image)
    expected = (encoder.body.input_shape[1], encoder.body.input_shape[2], 3)
    if image.shape != expected:
        raise ShapeError(f"encode_image expects {expected}, got {image.shape}")
    encoder.eval()
    return encoder(image_tensor(image))[0].numpy()
