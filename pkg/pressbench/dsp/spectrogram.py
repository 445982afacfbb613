"""Log-Mel spectrograms and their normalization."""
import logging
import warnings
from functools import lru_cache
from typing import Iterable

import librosa
import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from pressbench.config import MelConfig
from pressbench.errors import ConfigurationError, ShapeError

logger = logging.getLogger(__name__)


class SpecStats(BaseModel):
    """Corpus-level spectrogram moments."""

    model_config = ConfigDict(frozen=True)

    mean: float
    std: float

    @field_validator("std")
    @classmethod
    def _positive_std(cls, value: float) -> float:
        if not value > 0:
            raise ConfigurationError(f"SpecStats.std must be > 0 (got {value})")
        return value


class LogMelSpectrogram(BaseModel):
    """A frames x mels log-energy array with its window start time."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: np.ndarray
    start_time: float = 0.0

    @property
    def shape(self) -> tuple:
        return self.values.shape


@lru_cache(maxsize=8)
def mel_filterbank(cfg: MelConfig) -> np.ndarray:
    """Triangular HTK-scale filterbank, shape (n_mels, fft_size // 2 + 1), unnormalized."""
    with warnings.catch_warnings():
        # the lowest HTK bands are narrower than one FFT bin
        warnings.simplefilter("ignore", UserWarning)
        bank = librosa.filters.mel(
            sr=cfg.sample_rate,
            n_fft=cfg.fft_size,
            n_mels=cfg.n_mels,
            fmin=cfg.f_min,
            fmax=cfg.f_max,
            htk=True,
            norm=None,
            dtype=np.float64,
        )
    return bank


def mel_center_frequencies(cfg: MelConfig) -> np.ndarray:
    """Centre frequency (Hz) of each filter of ``mel_filterbank``."""
    edges = librosa.mel_frequencies(n_mels=cfg.n_mels + 2, fmin=cfg.f_min, fmax=cfg.f_max, htk=True)
    return edges[1:-1]


@lru_cache(maxsize=8)
def _analysis_window(window_length: int) -> np.ndarray:
    return librosa.filters.get_window("hann", window_length, fftbins=True)


def power_frames(window: np.ndarray, cfg: MelConfig) -> np.ndarray:
    """Magnitude-squared spectra of Hann-windowed frames, shape (frames, bins)."""
    frames = librosa.util.frame(
        np.ascontiguousarray(window, dtype=np.float64),
        frame_length=cfg.window_length,
        hop_length=cfg.hop_length,
        axis=0,
    )
    spectrum = np.fft.rfft(frames * _analysis_window(cfg.window_length), n=cfg.fft_size, axis=1)
    return np.abs(spectrum) ** 2


def log_mel(window: np.ndarray, cfg: MelConfig, start_time: float = 0.0) -> LogMelSpectrogram:
    """Log-Mel spectrogram of one analysis window.

    Args:
        window: Exactly ``window_seconds * sample_rate`` samples
        cfg: Front-end configuration
        start_time: Time of the first sample (s), carried through

    Returns:
        LogMelSpectrogram of shape (n_frames, n_mels), float32
    """
    window = np.asarray(window)
    if window.ndim != 1 or window.shape[0] != cfg.window_samples:
        raise ShapeError(
            f"log_mel expects {cfg.window_samples} samples, got shape {window.shape}"
        )
    energy = power_frames(window, cfg) @ mel_filterbank(cfg).T
    values = np.log(np.maximum(energy, cfg.log_floor)).astype(np.float32)
    return LogMelSpectrogram(values=values, start_time=start_time)


def normalize_spec(spec: LogMelSpectrogram, stats: SpecStats) -> LogMelSpectrogram:
    """Shift and scale to half-unit variance: (x - mean) / (2 std)."""
    if not stats.std > 0:
        raise ConfigurationError("SpecStats.std must be > 0")
    values = ((spec.values - stats.mean) / (2.0 * stats.std)).astype(np.float32)
    return LogMelSpectrogram(values=values, start_time=spec.start_time)


def denormalize_spec(spec: LogMelSpectrogram, stats: SpecStats) -> LogMelSpectrogram:
    """Inverse of ``normalize_spec``."""
    values = (spec.values.astype(np.float64) * 2.0 * stats.std + stats.mean).astype(np.float32)
    return LogMelSpectrogram(values=values, start_time=spec.start_time)


def compute_spec_stats(spectrograms: Iterable[np.ndarray]) -> SpecStats:
    """Mean and standard deviation over every entry of a spectrogram corpus."""
    total = 0.0
    total_sq = 0.0
    count = 0
    for values in spectrograms:
        values = np.asarray(values, dtype=np.float64)
        total += float(values.sum())
        total_sq += float(np.square(values).sum())
        count += values.size
    if count == 0:
        raise ConfigurationError("cannot compute spectrogram statistics of an empty corpus")
    mean = total / count
    variance = max(total_sq / count - mean * mean, 0.0)
    std = float(np.sqrt(variance))
    if std == 0.0:
        logger.warning("Spectrogram corpus has zero variance; falling back to std=1")
        std = 1.0
    logger.info(f"Spectrogram stats over {count} entries: mean={mean:.3f}, std={std:.3f}")
    return SpecStats(mean=mean, std=std)
