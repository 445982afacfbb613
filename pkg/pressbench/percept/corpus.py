"""Labelled spectrogram corpora: synthetic audio events and detector windows."""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict
from torch.utils.data import Dataset

from pressbench.config import MelConfig
from pressbench.data.models import Episode
from pressbench.data.windows import event_in_window, window_spectrogram
from pressbench.dsp.spectrogram import SpecStats, compute_spec_stats, log_mel
from pressbench.errors import ConfigurationError
from pressbench.sim.audio import click_transient

logger = logging.getLogger(__name__)

EVENT_CLASSES = ("noise", "tone_burst", "chirp", "click")


class SpectrogramDataset(Dataset):
    """Normalized spectrograms (kept as float16) with integer labels."""

    def __init__(self, spectrograms: np.ndarray, labels: np.ndarray):
        if len(spectrograms) != len(labels):
            raise ConfigurationError("spectrograms and labels differ in length")
        self.spectrograms = np.asarray(spectrograms, dtype=np.float16)
        self.labels = np.asarray(labels, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, index: int) -> Tuple[torch.Tensor, torch.Tensor]:
        spec = torch.from_numpy(self.spectrograms[index].astype(np.float32))
        return spec, torch.tensor(self.labels[index])

    @property
    def classes(self) -> List[int]:
        return sorted(set(self.labels.tolist()))

    def subset(self, indices: Sequence[int]) -> "SpectrogramDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return SpectrogramDataset(self.spectrograms[indices], self.labels[indices])


class EventCorpus(BaseModel):
    """Synthetic pretraining corpus and the moments it was normalized with."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    dataset: SpectrogramDataset
    stats: SpecStats
    class_names: List[str]


def _hann_envelope(n: int) -> np.ndarray:
    return np.hanning(n) if n > 1 else np.ones(n)


def _event(label: int, rng: np.random.Generator, mel: MelConfig) -> np.ndarray:
    sr = mel.sample_rate
    n = mel.window_samples
    signal = rng.uniform(0.001, 0.004) * rng.standard_normal(n)
    if label == 0:
        return signal

    if label == 1:
        duration = rng.uniform(0.15, 0.5)
        tau = np.arange(int(duration * sr)) / sr
        burst = rng.uniform(0.05, 0.3) * np.sin(2 * np.pi * rng.uniform(300.0, 1500.0) * tau)
        burst *= _hann_envelope(len(tau))
    elif label == 2:
        duration = rng.uniform(0.2, 0.6)
        tau = np.arange(int(duration * sr)) / sr
        f0, f1 = rng.uniform(500.0, 1500.0), rng.uniform(3000.0, 7000.0)
        phase = 2 * np.pi * (f0 * tau + 0.5 * (f1 - f0) * tau**2 / duration)
        burst = rng.uniform(0.05, 0.3) * np.sin(phase) * _hann_envelope(len(tau))
    else:
        decay = rng.uniform(0.003, 0.008)
        tau = np.arange(int(10 * decay * sr)) / sr
        burst = click_transient(tau, rng.uniform(0.2, 0.6), rng.uniform(2000.0, 4500.0), decay)
        crack = int(0.005 * sr)
        burst[:crack] += rng.uniform(0.05, 0.15) * rng.standard_normal(crack)

    start = int(rng.integers(0, n - len(burst) + 1))
    signal[start : start + len(burst)] += burst
    return signal


def synthetic_event_corpus(
    n_per_class: int, mel: MelConfig, seed: int, classes: Sequence[str] = EVENT_CLASSES
) -> EventCorpus:
    """Labelled 3-s windows of noise, tone bursts, chirps and broadband clicks.

    Args:
        n_per_class: Windows per class
        mel: Front-end configuration
        seed: Corpus seed
        classes: Subset of ``EVENT_CLASSES`` to generate

    Returns:
        EventCorpus normalized with its own spectrogram moments
    """
    rng = np.random.default_rng(seed)
    codes = [EVENT_CLASSES.index(name) for name in classes]
    labels = np.repeat(np.arange(len(codes)), n_per_class)
    raw = np.stack(
        [log_mel(np.clip(_event(codes[y], rng, mel), -1.0, 1.0), mel).values for y in labels]
    ) if len(labels) else np.zeros((0, mel.n_frames, mel.n_mels), np.float32)
    stats = compute_spec_stats(raw) if len(raw) else SpecStats(mean=0.0, std=1.0)
    normalized = (raw - stats.mean) / (2.0 * stats.std)
    logger.info(f"Synthesized {len(labels)} event windows over {len(codes)} classes")
    return EventCorpus(
        dataset=SpectrogramDataset(normalized, labels),
        stats=stats,
        class_names=list(classes),
    )


class DetectorWindows(BaseModel):
    """Click-detector windows cut from recorded episodes."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    dataset: SpectrogramDataset
    episode_ids: np.ndarray
    steps: np.ndarray

    @property
    def positives(self) -> int:
        return int(self.dataset.labels.sum())


def build_detector_windows(
    episodes: Sequence[Episode],
    mel: MelConfig,
    stats: SpecStats,
    stride: int = 2,
    episode_ids: Optional[Sequence[int]] = None,
) -> DetectorWindows:
    """Every ``stride``-th 3-s window of the selected episodes.

    The label is 1 iff the privileged channel recorded a press edge inside the
    window's span.
    """
    if stride < 1:
        raise ConfigurationError(f"window stride must be >= 1 (got {stride})")
    selected = range(len(episodes)) if episode_ids is None else episode_ids
    specs, labels, owners, steps = [], [], [], []
    for e in selected:
        episode = episodes[e]
        for i in range(0, len(episode), stride):
            specs.append(window_spectrogram(episode, i, mel, stats).astype(np.float16))
            labels.append(event_in_window(episode, i, mel))
            owners.append(e)
            steps.append(i)
    shape = (0, mel.n_frames, mel.n_mels)
    windows = DetectorWindows(
        dataset=SpectrogramDataset(np.stack(specs) if specs else np.zeros(shape, np.float16), np.array(labels)),
        episode_ids=np.array(owners, dtype=np.int64),
        steps=np.array(steps, dtype=np.int64),
    )
    logger.info(f"Built {len(windows.dataset)} detector windows ({windows.positives} positive)")
    return windows


def split_episodes(n: int, val_fraction: float, seed: int) -> Tuple[List[int], List[int]]:
    """Seeded episode-level train/validation split; validation gets at least one episode when n >= 2."""
    order = np.random.default_rng(seed).permutation(n).tolist()
    if n < 2:
        return order, order
    n_val = min(n - 1, max(1, int(round(n * val_fraction))))
    return sorted(order[n_val:]), sorted(order[:n_val])
