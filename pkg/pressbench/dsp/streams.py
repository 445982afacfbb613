"""Sample-rate conversion and the rolling audio window."""
from typing import List, Optional

import numpy as np

from pressbench.errors import DomainError


def resample(samples: np.ndarray, src_rate: float, dst_rate: float) -> np.ndarray:
    """Linear-interpolation resampling.

    Output length is ``round(len * dst / src)``; the input is returned unchanged
    when the rates agree.
    """
    if src_rate <= 0 or dst_rate <= 0:
        raise DomainError(f"sample rates must be positive (got {src_rate}, {dst_rate})")
    samples = np.asarray(samples)
    if src_rate == dst_rate or samples.size == 0:
        return samples.copy()
    n_out = int(round(samples.shape[0] * dst_rate / src_rate))
    positions = np.arange(n_out) * (src_rate / dst_rate)
    resampled = np.interp(positions, np.arange(samples.shape[0]), samples.astype(np.float64))
    return resampled.astype(samples.dtype if np.issubdtype(samples.dtype, np.floating) else np.float64)


class AudioRing:
    """Append-only audio stream whose sample 0 sits at ``origin`` seconds.

    With a ``capacity`` only the newest ``capacity`` samples are retained;
    sample indices and ``end_time`` still count everything appended.
    """

    def __init__(self, sample_rate: int, origin: float = 0.0, capacity: Optional[int] = None):
        if capacity is not None and capacity < 1:
            raise DomainError(f"ring capacity must be positive (got {capacity})")
        self.sample_rate = sample_rate
        self.origin = origin
        self.capacity = capacity
        self._chunks: List[np.ndarray] = []
        self._length = 0
        self._dropped = 0
        self._cache: np.ndarray = np.zeros(0, dtype=np.float32)

    def __len__(self) -> int:
        return self._length

    @property
    def dropped(self) -> int:
        """Number of leading samples no longer retained."""
        return self._dropped

    def append(self, chunk: np.ndarray) -> None:
        chunk = np.asarray(chunk, dtype=np.float32)
        self._chunks.append(chunk)
        self._length += chunk.shape[0]
        if self.capacity is not None and self._length - self._dropped >= 2 * self.capacity:
            self._compact()

    def _compact(self) -> None:
        data = np.concatenate(self._chunks) if self._chunks else np.zeros(0, np.float32)
        if self.capacity is not None and data.shape[0] > self.capacity:
            self._dropped += data.shape[0] - self.capacity
            data = data[-self.capacity :].copy()
        self._cache = data
        self._chunks = [data]

    def samples(self) -> np.ndarray:
        """Retained samples; the first one has index ``dropped``."""
        if self._cache.shape[0] != self._length - self._dropped:
            self._compact()
        return self._cache

    @property
    def end_time(self) -> float:
        return self.origin + self._length / self.sample_rate


def ring_window(stream: AudioRing, t: float, seconds: float = 3.0) -> np.ndarray:
    """The ``seconds`` of audio ending at time ``t``, zero-padded on the left.

    Samples later than ``t`` are ignored, so ``t`` may lag the stream end.
    """
    n = int(round(seconds * stream.sample_rate))
    end = int(round((t - stream.origin) * stream.sample_rate))
    end = min(max(end, 0), len(stream))
    start = end - n
    window = np.zeros(n, dtype=np.float32)
    data = stream.samples()
    if end > 0:
        lo = max(start, 0)
        if lo < stream.dropped:
            raise DomainError(
                f"window starting at sample {lo} reaches before the retained audio (from {stream.dropped})"
            )
        window[n - (end - lo) :] = data[lo - stream.dropped : end - stream.dropped]
    return window
