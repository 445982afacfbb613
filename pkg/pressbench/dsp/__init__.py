"""Audio front end."""
from pressbench.dsp.spectrogram import (
    LogMelSpectrogram,
    SpecStats,
    compute_spec_stats,
    denormalize_spec,
    log_mel,
    mel_center_frequencies,
    mel_filterbank,
    normalize_spec,
)
from pressbench.dsp.streams import AudioRing, resample, ring_window

__all__ = [
    "AudioRing",
    "LogMelSpectrogram",
    "SpecStats",
    "compute_spec_stats",
    "denormalize_spec",
    "log_mel",
    "mel_center_frequencies",
    "mel_filterbank",
    "normalize_spec",
    "resample",
    "ring_window",
]
