"""Dataset records: time steps, episodes, normalization statistics, manifest."""
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from pressbench.config import SCHEMA_VERSION
from pressbench.dsp.spectrogram import SpecStats
from pressbench.dsp.streams import AudioRing
from pressbench.errors import ConfigurationError


class TimeStep(BaseModel):
    """One 10 Hz observation-action record.

    ``audio_chunk`` is the audio of the interval ending at ``t``; ``action`` is
    the displacement (m) commanded at ``t``.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    image: np.ndarray
    audio_chunk: np.ndarray
    button_state: int
    eef_position: np.ndarray
    action: np.ndarray
    force: np.ndarray
    press_edge: bool
    t: float
    peak_fz: float = 0.0


EPISODE_ARRAYS = {
    "image": "u8",
    "audio": "f32",
    "button_state": "u8",
    "eef_position": "f32",
    "action": "f32",
    "force": "f32",
    "press_edge": "u8",
    "t": "f32",
    "peak_fz": "f32",
}


class Episode(BaseModel):
    """One demonstration, stored column-wise."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    seed: int
    success: bool
    metadata: Dict[str, Any] = Field(default_factory=dict)
    image: np.ndarray
    audio: np.ndarray
    button_state: np.ndarray
    eef_position: np.ndarray
    action: np.ndarray
    force: np.ndarray
    press_edge: np.ndarray
    t: np.ndarray
    peak_fz: np.ndarray

    @model_validator(mode="after")
    def _consistent(self) -> "Episode":
        n = len(self.t)
        for name in EPISODE_ARRAYS:
            if name != "audio" and len(getattr(self, name)) != n:
                raise ConfigurationError(f"episode array {name} has {len(getattr(self, name))} rows, expected {n}")
        if n and self.audio.shape[0] % n:
            raise ConfigurationError("audio length is not a whole number of chunks")
        return self

    def __len__(self) -> int:
        return len(self.t)

    @property
    def chunk_length(self) -> int:
        return self.audio.shape[0] // len(self) if len(self) else 0

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in EPISODE_ARRAYS}

    def step(self, i: int) -> TimeStep:
        n = self.chunk_length
        return TimeStep(
            image=self.image[i],
            audio_chunk=self.audio[i * n : (i + 1) * n],
            button_state=int(self.button_state[i]),
            eef_position=self.eef_position[i],
            action=self.action[i],
            force=self.force[i],
            press_edge=bool(self.press_edge[i]),
            t=float(self.t[i]),
            peak_fz=float(self.peak_fz[i]),
        )

    @property
    def steps(self) -> List[TimeStep]:
        return [self.step(i) for i in range(len(self))]

    @property
    def press_index(self) -> Optional[int]:
        hits = np.flatnonzero(self.press_edge)
        return int(hits[0]) if hits.size else None

    def audio_stream(self, sample_rate: int) -> AudioRing:
        """Audio as a stream; chunk 0 covers (-chunk duration, 0]."""
        ring = AudioRing(sample_rate, origin=-self.chunk_length / sample_rate)
        ring.append(self.audio)
        return ring

    @classmethod
    def from_steps(cls, steps: List[TimeStep], seed: int, success: bool, metadata: Dict[str, Any]) -> "Episode":
        def stack(name: str, dtype) -> np.ndarray:
            return np.asarray([getattr(s, name) for s in steps], dtype=dtype)

        return cls(
            seed=seed,
            success=success,
            metadata=metadata,
            image=stack("image", np.uint8).reshape(len(steps), *(steps[0].image.shape if steps else (0, 0, 3))),
            audio=(np.concatenate([s.audio_chunk for s in steps]) if steps else np.zeros(0)).astype(np.float32),
            button_state=stack("button_state", np.uint8),
            eef_position=stack("eef_position", np.float32).reshape(-1, 3),
            action=stack("action", np.float32).reshape(-1, 3),
            force=stack("force", np.float32).reshape(-1, 3),
            press_edge=stack("press_edge", np.uint8),
            t=stack("t", np.float32),
            peak_fz=stack("peak_fz", np.float32),
        )


class NormStats(BaseModel):
    """Per-dimension ranges for [-1, 1] normalization and spectrogram moments."""

    model_config = ConfigDict(frozen=True)

    action_min: List[float]
    action_max: List[float]
    eef_min: List[float]
    eef_max: List[float]
    spec: SpecStats

    @model_validator(mode="after")
    def _ranges(self) -> "NormStats":
        for lo, hi, name in ((self.action_min, self.action_max, "action"), (self.eef_min, self.eef_max, "eef")):
            if any(h <= l for l, h in zip(lo, hi)):
                raise ConfigurationError(f"{name} range needs max > min on every dimension")
        return self


class CollectionStats(BaseModel):
    """What happened during demonstration collection."""

    attempted: int = 0
    succeeded: int = 0
    excluded_seeds: List[int] = Field(default_factory=list)
    expert_peak_fz_median: Optional[float] = None


class EpisodeEntry(BaseModel):
    file: str
    seed: int
    steps: int


class Manifest(BaseModel):
    """``manifest.json`` of a collected dataset."""

    schema_version: int = SCHEMA_VERSION
    config_hash: str
    base_seed: int
    episodes: List[EpisodeEntry] = Field(default_factory=list)
    stats: CollectionStats = Field(default_factory=CollectionStats)
    norm: Optional[NormStats] = None
    sim_config: Dict[str, Any] = Field(default_factory=dict)
    mel_config: Dict[str, Any] = Field(default_factory=dict)
