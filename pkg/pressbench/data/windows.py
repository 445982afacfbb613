"""Audio windows of recorded episodes."""
import numpy as np

from pressbench.config import MelConfig
from pressbench.data.models import Episode
from pressbench.dsp.spectrogram import SpecStats, log_mel, normalize_spec


def episode_window(episode: Episode, index: int, mel: MelConfig, offset_samples: int = 0) -> np.ndarray:
    """The analysis window ending with step ``index``'s audio chunk.

    The window ends ``offset_samples`` before the end of that chunk and is
    zero-padded on the left when the episode is shorter than the window.
    """
    n = mel.window_samples
    end = (index + 1) * episode.chunk_length - offset_samples
    end = min(max(end, 0), episode.audio.shape[0])
    lo = max(end - n, 0)
    window = np.zeros(n, dtype=np.float32)
    if end > lo:
        window[n - (end - lo) :] = episode.audio[lo:end]
    return window


def window_spectrogram(
    episode: Episode, index: int, mel: MelConfig, stats: SpecStats, offset_samples: int = 0
) -> np.ndarray:
    """Normalized log-Mel spectrogram (frames x mels) of ``episode_window``."""
    spec = log_mel(episode_window(episode, index, mel, offset_samples), mel)
    return normalize_spec(spec, stats).values


def steps_per_window(episode: Episode, mel: MelConfig) -> int:
    if not episode.chunk_length:
        return 0
    return max(1, int(round(mel.window_samples / episode.chunk_length)))


def event_in_window(episode: Episode, index: int, mel: MelConfig) -> int:
    """1 iff a press edge happened in any chunk covered by the window ending at ``index``."""
    span = steps_per_window(episode, mel)
    lo = max(0, index - span + 1)
    return int(np.any(episode.press_edge[lo : index + 1]))
