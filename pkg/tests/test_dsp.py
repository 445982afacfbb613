"""Tests for the log-Mel front end and audio streams."""
import numpy as np
import pytest

from pressbench.dsp import (
    AudioRing,
    SpecStats,
    compute_spec_stats,
    denormalize_spec,
    log_mel,
    mel_center_frequencies,
    mel_filterbank,
    normalize_spec,
    resample,
    ring_window,
)
from pressbench.errors import ConfigurationError, DomainError, ShapeError


def _tone(freq, mel):
    t = np.arange(mel.window_samples) / mel.sample_rate
    return 0.5 * np.sin(2 * np.pi * freq * t)


def test_default_window_shape(mel_config):
    spec = log_mel(np.zeros(mel_config.window_samples), mel_config)
    assert spec.shape == (298, 128)
    assert spec.values.dtype == np.float32


def test_silence_is_log_floor(mel_config):
    spec = log_mel(np.zeros(mel_config.window_samples), mel_config)
    assert np.all(spec.values == np.float32(np.log(1e-10)))


def test_wrong_length_is_rejected(mel_config):
    with pytest.raises(ShapeError):
        log_mel(np.zeros(mel_config.window_samples - 1), mel_config)
    with pytest.raises(ShapeError):
        log_mel(np.zeros((2, mel_config.window_samples)), mel_config)


def test_filterbank_layout(mel_config):
    bank = mel_filterbank(mel_config)
    assert bank.shape == (128, 257)
    assert np.all(bank >= 0.0)
    centers = mel_center_frequencies(mel_config)
    assert centers.shape == (128,)
    assert np.all(np.diff(centers) > 0)
    assert 0.0 < centers[0] and centers[-1] < 8000.0


def test_tone_peaks_near_its_mel_band(mel_config):
    spec = log_mel(_tone(1000.0, mel_config), mel_config)
    centers = mel_center_frequencies(mel_config)
    peak_band = int(np.argmax(spec.values.mean(axis=0)))
    assert abs(centers[peak_band] - 1000.0) < 100.0


def test_start_time_is_carried(mel_config):
    spec = log_mel(np.zeros(mel_config.window_samples), mel_config, start_time=1.5)
    assert spec.start_time == 1.5


def test_normalize_inverts(mel_config):
    spec = log_mel(_tone(440.0, mel_config), mel_config)
    stats = SpecStats(mean=-5.0, std=3.0)
    normalized = normalize_spec(spec, stats)
    assert normalized.values[0, 0] == pytest.approx((spec.values[0, 0] + 5.0) / 6.0, rel=1e-5)
    restored = denormalize_spec(normalized, stats)
    assert np.allclose(restored.values, spec.values, atol=1e-4)


def test_spec_stats_rejects_non_positive_std():
    with pytest.raises(ConfigurationError):
        SpecStats(mean=0.0, std=0.0)


def test_compute_spec_stats():
    stats = compute_spec_stats([np.array([1.0, 3.0]), np.array([[5.0, 7.0]])])
    assert stats.mean == pytest.approx(4.0)
    assert stats.std == pytest.approx(np.std([1.0, 3.0, 5.0, 7.0]))


def test_compute_spec_stats_degenerate():
    assert compute_spec_stats([np.full(10, 2.0)]).std == 1.0
    with pytest.raises(ConfigurationError):
        compute_spec_stats([])


def test_time_shift_by_one_hop_shifts_frames(mel_config):
    rng = np.random.default_rng(3)
    hop = mel_config.hop_length
    audio = rng.normal(0.0, 0.1, mel_config.window_samples + hop)
    first = log_mel(audio[: mel_config.window_samples], mel_config).values
    shifted = log_mel(audio[hop:], mel_config).values
    assert np.allclose(first[1:], shifted[:-1], atol=1e-4)


def test_filterbank_columns_sum_to_at_most_one(mel_config):
    bank = mel_filterbank(mel_config)
    assert np.all(bank.sum(axis=0) <= 1.0 + 1e-9)
    assert bank.max() <= 1.0 + 1e-9


def test_normalized_corpus_has_half_unit_std(mel_config):
    rng = np.random.default_rng(4)
    corpus = [log_mel(rng.normal(0.0, scale, mel_config.window_samples), mel_config) for scale in (0.01, 0.1, 0.5)]
    stats = compute_spec_stats([s.values for s in corpus])
    normalized = np.concatenate([normalize_spec(s, stats).values.ravel() for s in corpus]).astype(np.float64)
    assert normalized.mean() == pytest.approx(0.0, abs=1e-3)
    assert normalized.std() == pytest.approx(0.5, abs=1e-3)


def test_ring_window_left_pads():
    ring = AudioRing(10, origin=0.0)
    ring.append(np.arange(1, 6, dtype=np.float32))
    window = ring_window(ring, 0.5, seconds=1.0)
    assert window.shape == (10,)
    assert np.array_equal(window, [0, 0, 0, 0, 0, 1, 2, 3, 4, 5])


def test_ring_window_ignores_future_samples():
    ring = AudioRing(10, origin=-0.2)
    ring.append(np.arange(20, dtype=np.float32))
    # t = 0.3 s is sample 5 past the origin
    window = ring_window(ring, 0.3, seconds=0.4)
    assert np.array_equal(window, [1, 2, 3, 4])
    assert ring.end_time == pytest.approx(1.8)


def test_ring_window_before_origin_is_silent():
    ring = AudioRing(10, origin=0.0)
    ring.append(np.ones(5, np.float32))
    assert not ring_window(ring, -1.0, seconds=0.5).any()


def test_resample():
    x = np.linspace(0.0, 1.0, 100, dtype=np.float32)
    assert np.array_equal(resample(x, 16000, 16000), x)
    y = resample(x, 16000, 8000)
    assert y.shape == (50,)
    assert y.dtype == np.float32
    assert y[1] == pytest.approx(x[2])
    with pytest.raises(DomainError):
        resample(x, 0, 16000)


def test_bounded_ring_keeps_only_recent_audio():
    ring = AudioRing(10, origin=0.0, capacity=8)
    for i in range(10):
        ring.append(np.full(3, i, np.float32))
    assert len(ring) == 30
    assert ring.samples().shape[0] <= 2 * 8
    assert ring.dropped == 30 - ring.samples().shape[0]
    assert ring.end_time == pytest.approx(3.0)
    assert np.array_equal(ring_window(ring, 3.0, seconds=0.8), [7, 7, 8, 8, 8, 9, 9, 9])


def test_bounded_ring_matches_unbounded_windows():
    rng = np.random.default_rng(5)
    bounded = AudioRing(100, origin=-0.1, capacity=150)
    unbounded = AudioRing(100, origin=-0.1)
    for i in range(40):
        chunk = rng.normal(size=10).astype(np.float32)
        bounded.append(chunk)
        unbounded.append(chunk)
        t = bounded.end_time
        assert np.array_equal(ring_window(bounded, t, 1.0), ring_window(unbounded, t, 1.0))
        assert np.array_equal(ring_window(bounded, t - 0.4, 1.0), ring_window(unbounded, t - 0.4, 1.0))
    assert bounded.samples().shape[0] < unbounded.samples().shape[0]


def test_bounded_ring_rejects_windows_reaching_dropped_audio():
    ring = AudioRing(10, origin=0.0, capacity=5)
    ring.append(np.arange(20, dtype=np.float32))
    ring.samples()
    with pytest.raises(DomainError):
        ring_window(ring, 2.0, seconds=1.0)
    with pytest.raises(DomainError):
        AudioRing(10, capacity=0)
