"""Conditioning vectors of the four audio integration variants."""
import logging
from typing import Optional, Union

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict
from torch import Tensor

from pressbench.config import Variant
from pressbench.errors import ConfigurationError, PrivilegedLeakError
from pressbench.percept.detector import ClickDetector, decide
from pressbench.percept.encoders import FEATURE_DIM, AudioEncoder

logger = logging.getLogger(__name__)

AudioModel = Union[AudioEncoder, ClickDetector]

AUDIO_DIMS = {
    Variant.GENERIC_EMBED: FEATURE_DIM,
    Variant.FUSION_EMBED: FEATURE_DIM,
    Variant.FUSION_LOGITS: 2,
    Variant.SOFT_SENSOR: 1,
}


def conditioning_dim(variant: Variant) -> int:
    return FEATURE_DIM + AUDIO_DIMS[Variant(variant)]


def check_audio_model(variant: Variant, model: Optional[AudioModel]) -> None:
    """The generic variant takes the pretrained encoder; all others the fine-tuned detector."""
    if variant == Variant.GENERIC_EMBED:
        if not isinstance(model, AudioEncoder):
            raise ConfigurationError("the generic variant needs the pretrained audio encoder")
    elif not isinstance(model, ClickDetector):
        raise ConfigurationError(f"the {Variant(variant).display_name} variant needs a fine-tuned click detector")


@torch.no_grad()
def audio_features(variant: Variant, model: AudioModel, specs: Tensor) -> Tensor:
    """Frozen audio conditioning of a batch of normalized spectrograms.

    Embeddings for the embedding variants, raw (pre-softmax) logits for
    FusionLogits, the thresholded detector state for SoftSensor.
    """
    model.eval()
    if variant in (Variant.GENERIC_EMBED, Variant.FUSION_EMBED):
        return model.embed(specs)
    logits = model(specs)
    if variant == Variant.FUSION_LOGITS:
        return logits
    return decide(logits, model.threshold)[1].float().unsqueeze(-1)


class Conditioning(BaseModel):
    """Vision feature and variant-dependent audio part, for one observation or a batch."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    variant: Variant
    vision: np.ndarray
    audio: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.vision, self.audio], axis=-1).astype(np.float32)

    def __len__(self) -> int:
        return self.vision.shape[-1] + self.audio.shape[-1]


def audio_conditioning(
    variant: Variant,
    spectrogram: Optional[np.ndarray],
    audio_model: Optional[AudioModel],
    privileged_state: Optional[Union[int, np.ndarray]] = None,
    training: bool = False,
) -> np.ndarray:
    """Audio part of the conditioning, (A,) for one window or (B, A) for a stack.

    SoftSensor training takes the instrumented button state; every other
    case runs the frozen audio model and rejects a privileged state.
    """
    variant = Variant(variant)
    if variant == Variant.SOFT_SENSOR and training:
        if privileged_state is None:
            raise ConfigurationError("SoftSensor training needs the instrumented button state")
        return np.asarray(privileged_state, dtype=np.float32)[..., None]

    if privileged_state is not None:
        raise PrivilegedLeakError(
            f"{variant.display_name} conditioning received the privileged button state"
            + (" at inference" if variant == Variant.SOFT_SENSOR else "")
        )
    check_audio_model(variant, audio_model)
    if spectrogram is None:
        raise ConfigurationError(f"{variant.display_name} conditioning needs an audio window")
    specs = torch.from_numpy(np.ascontiguousarray(spectrogram, dtype=np.float32))
    audio = audio_features(variant, audio_model, specs).numpy().astype(np.float32)
    return audio[0] if specs.dim() == 2 else audio


def build_conditioning(
    variant: Variant,
    vision_feature: np.ndarray,
    spectrogram: Optional[np.ndarray],
    audio_model: Optional[AudioModel],
    privileged_state: Optional[Union[int, np.ndarray]] = None,
    training: bool = False,
) -> Conditioning:
    """Assemble the conditioning of one observation or a batch of them.

    Args:
        variant: Integration strategy
        vision_feature: 64-dim image feature, or (B, 64)
        spectrogram: Normalized audio window (for SoftSensor at inference, the
            window ending one latency before the observation time), or a stack
        audio_model: Pretrained encoder (generic) or click detector (others)
        privileged_state: Instrumented button state; SoftSensor training only
        training: Whether this conditioning feeds the training loss

    Returns:
        Conditioning of length 128, 66 or 65 depending on the variant
    """
    variant = Variant(variant)
    vision = np.asarray(vision_feature, dtype=np.float32)
    if vision.shape[-1] != FEATURE_DIM:
        raise ConfigurationError(f"vision feature has width {vision.shape[-1]}, expected {FEATURE_DIM}")
    audio = audio_conditioning(variant, spectrogram, audio_model, privileged_state, training)
    if audio.ndim != vision.ndim:
        raise ConfigurationError("vision feature and audio window disagree on batching")
    return Conditioning(variant=variant, vision=vision, audio=audio)
