"""Train-time image augmentation: random crop and colour jitter."""
from typing import Optional

import numpy as np
import torch
import torchvision.transforms.functional as TF

from pressbench.config import AugmentConfig
from pressbench.errors import ShapeError


def _to_tensor(image: np.ndarray) -> torch.Tensor:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeError(f"expected an H x W x 3 image, got {image.shape}")
    if image.dtype == np.uint8:
        image = image.astype(np.float32) / 255.0
    return torch.from_numpy(np.ascontiguousarray(image, dtype=np.float32)).permute(2, 0, 1)


def _to_numpy(tensor: torch.Tensor) -> np.ndarray:
    return tensor.permute(1, 2, 0).contiguous().numpy()


def center_crop(image: np.ndarray, size: int) -> np.ndarray:
    """Inference path: centered ``size`` x ``size`` crop as float32 in [0, 1]."""
    tensor = _to_tensor(image)
    if size > min(tensor.shape[1:]):
        raise ShapeError(f"crop {size} does not fit inside a {tuple(tensor.shape[1:])} image")
    return _to_numpy(TF.center_crop(tensor, [size, size]))


def augment_image(image: np.ndarray, cfg: AugmentConfig, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Random crop, then brightness, contrast, saturation, hue and sharpness jitter.

    Args:
        image: H x W x 3 image (uint8, or float in [0, 1])
        cfg: Crop size and jitter amplitudes
        rng: Source of the crop offset and jitter factors; None selects the
            inference path (center crop, no jitter)

    Returns:
        crop x crop x 3 float32 image in [0, 1]
    """
    if rng is None:
        return center_crop(image, cfg.crop_size)
    tensor = _to_tensor(image)
    height, width = tensor.shape[1:]
    size = cfg.crop_size
    if size > min(height, width):
        raise ShapeError(f"crop {size} does not fit inside a {(height, width)} image")

    top = int(rng.integers(0, height - size + 1))
    left = int(rng.integers(0, width - size + 1))
    brightness = rng.uniform(1.0 - cfg.brightness, 1.0 + cfg.brightness)
    contrast = rng.uniform(1.0 - cfg.contrast, 1.0 + cfg.contrast)
    saturation = rng.uniform(1.0 - cfg.saturation, 1.0 + cfg.saturation)
    hue = rng.uniform(-cfg.hue, cfg.hue)
    sharpness = rng.uniform(1.0 - cfg.sharpness, 1.0 + cfg.sharpness)

    out = TF.crop(tensor, top, left, size, size)
    # identity factors are skipped; hue goes through HSV and is not exact at 0
    if brightness != 1.0:
        out = TF.adjust_brightness(out, brightness)
    if contrast != 1.0:
        out = TF.adjust_contrast(out, contrast)
    if saturation != 1.0:
        out = TF.adjust_saturation(out, saturation)
    if hue != 0.0:
        out = TF.adjust_hue(out, hue)
    if sharpness != 1.0:
        out = TF.adjust_sharpness(out, sharpness)
    return _to_numpy(out)
