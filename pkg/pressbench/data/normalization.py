"""[-1, 1] normalization of actions and EEF state, and dataset statistics."""
import logging
from typing import Iterable, List, Sequence

import numpy as np

from pressbench.config import MelConfig
from pressbench.data.models import Episode, NormStats
from pressbench.data.windows import episode_window
from pressbench.dsp.spectrogram import compute_spec_stats, log_mel
from pressbench.errors import ConfigurationError

logger = logging.getLogger(__name__)

# half-width given to a dimension that never varies in the dataset
DEGENERATE_HALF_RANGE = 1e-4


def _check_range(lo: np.ndarray, hi: np.ndarray) -> None:
    if np.any(hi <= lo):
        raise ConfigurationError(f"normalization needs hi > lo on every dimension (lo={lo}, hi={hi})")


def normalize(value, lo, hi) -> np.ndarray:
    """Affine map lo -> -1, hi -> +1, clamped to [-1, 1]."""
    value = np.asarray(value, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    _check_range(lo, hi)
    return np.clip(2.0 * (value - lo) / (hi - lo) - 1.0, -1.0, 1.0)


def denormalize(value, lo, hi) -> np.ndarray:
    """Inverse of ``normalize`` on [-1, 1]."""
    value = np.clip(np.asarray(value, dtype=np.float64), -1.0, 1.0)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    _check_range(lo, hi)
    return lo + (value + 1.0) * 0.5 * (hi - lo)


def _range(values: np.ndarray, name: str) -> tuple:
    lo = values.min(axis=0).astype(np.float64)
    hi = values.max(axis=0).astype(np.float64)
    flat = hi - lo < 2 * DEGENERATE_HALF_RANGE
    if np.any(flat):
        logger.warning(f"{name} does not vary on dimensions {np.flatnonzero(flat).tolist()}; widening range")
        mid = 0.5 * (lo + hi)
        lo = np.where(flat, mid - DEGENERATE_HALF_RANGE, lo)
        hi = np.where(flat, mid + DEGENERATE_HALF_RANGE, hi)
    return lo.tolist(), hi.tolist()


def dataset_spectrograms(episodes: Sequence[Episode], mel: MelConfig, stride: int) -> Iterable[np.ndarray]:
    """Raw log-Mel spectrograms of every ``stride``-th window of every episode."""
    for episode in episodes:
        for i in range(0, len(episode), stride):
            yield log_mel(episode_window(episode, i, mel), mel).values


def compute_norm_stats(episodes: Sequence[Episode], mel: MelConfig, window_stride: int = 5) -> NormStats:
    """Min/max of actions and EEF positions, and spectrogram moments, over a dataset.

    Args:
        episodes: Collected episodes (at least one step in total)
        mel: Front-end configuration
        window_stride: Every n-th step contributes a spectrogram window

    Returns:
        NormStats
    """
    steps = [e for e in episodes if len(e)]
    if not steps:
        raise ConfigurationError("cannot compute normalization statistics of an empty dataset")
    actions: List[np.ndarray] = [e.action for e in steps]
    positions: List[np.ndarray] = [e.eef_position for e in steps]
    action_min, action_max = _range(np.concatenate(actions), "action")
    eef_min, eef_max = _range(np.concatenate(positions), "eef_position")
    spec = compute_spec_stats(dataset_spectrograms(steps, mel, max(1, window_stride)))
    return NormStats(
        action_min=action_min,
        action_max=action_max,
        eef_min=eef_min,
        eef_max=eef_max,
        spec=spec,
    )
