"""Uniform minibatches of (observation, action) pairs."""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from pressbench.config import AugmentConfig, MelConfig
from pressbench.data.augment import augment_image
from pressbench.data.models import Episode, NormStats
from pressbench.data.normalization import normalize
from pressbench.data.windows import window_spectrogram
from pressbench.errors import ConfigurationError

logger = logging.getLogger(__name__)


class Batch(BaseModel):
    """One minibatch. ``indices`` are the sampled (episode, step) pairs."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    images: np.ndarray
    spectrograms: Optional[np.ndarray] = None
    button_state: np.ndarray
    actions: np.ndarray
    indices: List[Tuple[int, int]]

    def __len__(self) -> int:
        return len(self.indices)


def sample_indices(episodes: Sequence[Episode], batch_size: int, rng: np.random.Generator) -> List[Tuple[int, int]]:
    """(episode, step) pairs drawn uniformly over all steps of the dataset."""
    lengths = np.array([len(e) for e in episodes], dtype=np.int64)
    total = int(lengths.sum())
    if total == 0:
        raise ConfigurationError("cannot sample from an empty dataset")
    offsets = np.cumsum(lengths)
    flat = rng.integers(0, total, size=batch_size)
    episode_ids = np.searchsorted(offsets, flat, side="right")
    starts = offsets - lengths
    return [(int(e), int(f - starts[e])) for e, f in zip(episode_ids, flat)]


def sample_batch(
    episodes: Sequence[Episode],
    batch_size: int,
    rng: np.random.Generator,
    norm: NormStats,
    mel: MelConfig,
    augment: AugmentConfig,
    include_spectrograms: bool = True,
) -> Batch:
    """Sample a training batch.

    Args:
        episodes: Dataset
        batch_size: Items per batch
        rng: Drives the (episode, step) draw and the augmentation, in that order
        norm: Action normalization ranges and spectrogram moments
        mel: Front-end configuration
        augment: Crop size and jitter amplitudes
        include_spectrograms: Compute the normalized 3-s spectrogram of each item

    Returns:
        Batch with augmented images, spectrograms (optional), privileged button
        state and normalized actions
    """
    indices = sample_indices(episodes, batch_size, rng)
    images = np.stack([augment_image(episodes[e].image[t], augment, rng) for e, t in indices])
    spectrograms = None
    if include_spectrograms:
        spectrograms = np.stack([window_spectrogram(episodes[e], t, mel, norm.spec) for e, t in indices])
    button_state = np.array([episodes[e].button_state[t] for e, t in indices], dtype=np.float32)
    raw = np.stack([episodes[e].action[t] for e, t in indices])
    actions = normalize(raw, norm.action_min, norm.action_max).astype(np.float32)
    return Batch(
        images=images.astype(np.float32),
        spectrograms=spectrograms,
        button_state=button_state,
        actions=actions,
        indices=indices,
    )
