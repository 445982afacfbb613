"""Tests for the encoders, the synthetic corpus and the click detector."""
import numpy as np
import pytest
import torch

from pressbench.config import DetectorTrainingConfig
from pressbench.dsp import SpecStats
from pressbench.errors import ConfigurationError, ShapeError
from pressbench.percept import (
    AudioEncoder,
    ClickDetector,
    DetectorMetrics,
    SpectrogramDataset,
    VisionEncoder,
    build_detector_windows,
    detect,
    embed,
    encode_image,
    finetune_click_detector,
    load_detector,
    load_encoder,
    metrics_from_predictions,
    pretrain_audio,
    save_detector,
    save_encoder,
    split_episodes,
    synthetic_event_corpus,
)
from pressbench.percept.detector import decide
from tests.conftest import make_episode

STATS = SpecStats(mean=-10.0, std=5.0)


def _windows(n, seed=0):
    rng = np.random.default_rng(seed)
    specs = rng.normal(0.0, 0.5, (n, 298, 128)).astype(np.float32)
    labels = np.arange(n) % 2
    specs[labels == 1, :, 60:70] += 2.0
    return SpectrogramDataset(specs, labels)


def test_metrics_from_counts():
    metrics = DetectorMetrics.from_counts(tp=3, fp=1, tn=5, fn=1)
    assert metrics.f1 == pytest.approx(0.75)
    assert metrics.false_negative_rate == pytest.approx(0.25)
    assert metrics.total == 10


def test_metrics_without_positives_are_zero():
    metrics = DetectorMetrics.from_counts(tp=0, fp=0, tn=4, fn=0)
    assert metrics.f1 == 0.0
    assert metrics.false_negative_rate == 0.0


def test_metrics_from_predictions():
    metrics = metrics_from_predictions(np.array([1, 1, 0, 0, 1]), np.array([1, 0, 0, 1, 1]))
    assert (metrics.tp, metrics.fp, metrics.tn, metrics.fn) == (2, 1, 1, 1)
    with pytest.raises(ConfigurationError):
        metrics_from_predictions(np.array([]), np.array([]))


def test_decision_tie_is_positive():
    prob, state = decide(torch.zeros(1, 2), 0.5)
    assert prob.item() == pytest.approx(0.5)
    assert state.item() == 1


def test_detector_requires_two_classes():
    with pytest.raises(ConfigurationError):
        ClickDetector(AudioEncoder(4))


def test_audio_encoder_shapes():
    torch.manual_seed(0)
    encoder = AudioEncoder(4)
    specs = torch.zeros(2, 298, 128)
    assert encoder(specs).shape == (2, 4)
    assert encoder.embed(specs).shape == (2, 64)
    with pytest.raises(ShapeError):
        encoder(torch.zeros(2, 100, 128))


def test_vision_encoder_feature():
    torch.manual_seed(0)
    feature = encode_image(VisionEncoder(), np.zeros((86, 86, 3), np.uint8))
    assert feature.shape == (64,)
    with pytest.raises(ShapeError):
        encode_image(VisionEncoder(), np.zeros((96, 96, 3), np.uint8))


def test_synthetic_corpus_is_seeded(mel_config):
    a = synthetic_event_corpus(2, mel_config, seed=3)
    b = synthetic_event_corpus(2, mel_config, seed=3)
    assert len(a.dataset) == 8
    assert a.dataset.classes == [0, 1, 2, 3]
    assert a.class_names == ["noise", "tone_burst", "chirp", "click"]
    assert np.array_equal(a.dataset.spectrograms, b.dataset.spectrograms)
    assert a.stats == b.stats


def test_split_episodes():
    train, val = split_episodes(10, 0.25, seed=0)
    assert len(val) == 2 and len(train) == 8
    assert sorted(train + val) == list(range(10))
    assert split_episodes(1, 0.25, seed=0) == ([0], [0])


def test_detector_windows_label_press_in_span(mel_config):
    episode = make_episode(steps=40, press_at=20)
    windows = build_detector_windows([episode], mel_config, STATS, stride=2)
    assert len(windows.dataset) == 20
    assert windows.dataset.spectrograms.dtype == np.float16
    assert windows.positives == 10
    positive_steps = windows.steps[windows.dataset.labels == 1]
    assert positive_steps.min() == 20
    with pytest.raises(ConfigurationError):
        build_detector_windows([episode], mel_config, STATS, stride=0)


def test_finetune_needs_both_classes():
    single = SpectrogramDataset(np.zeros((3, 298, 128), np.float32), np.zeros(3))
    with pytest.raises(ConfigurationError):
        finetune_click_detector(AudioEncoder(4), single)


def test_finetune_leaves_pretrained_untouched():
    torch.manual_seed(0)
    pretrained = AudioEncoder(4)
    before = {k: v.clone() for k, v in pretrained.state_dict().items()}
    cfg = DetectorTrainingConfig(batch_size=4, warmup_steps=1)
    result = finetune_click_detector(pretrained, _windows(8), epochs=1, lr=1e-4, seed=0, cfg=cfg)
    assert result.detector.encoder.classes == 2
    assert result.metrics.total == 8
    assert len(result.loss_curve) == 1
    assert all(torch.equal(before[k], v) for k, v in pretrained.state_dict().items())


def test_pretraining_reports_held_out_accuracy(mel_config):
    torch.manual_seed(0)
    corpus = synthetic_event_corpus(3, mel_config, seed=0)
    result = pretrain_audio(AudioEncoder(4), corpus, epochs=1, lr=1e-4, seed=0)
    assert 0.0 <= result.accuracy <= 1.0
    assert len(result.loss_curve) == 1


def test_pretraining_needs_two_classes(mel_config):
    corpus = synthetic_event_corpus(2, mel_config, seed=0, classes=("click",))
    with pytest.raises(ConfigurationError):
        pretrain_audio(AudioEncoder(1), corpus, epochs=1, lr=1e-4, seed=0)


def test_detector_checkpoint_round_trip(tmp_path):
    torch.manual_seed(0)
    detector = ClickDetector(AudioEncoder(2), threshold=0.4)
    path = save_detector(tmp_path / "detector.pbc", detector, STATS)
    loaded, stats = load_detector(path)
    spec = np.random.default_rng(0).normal(size=(298, 128)).astype(np.float32)
    assert stats == STATS
    assert loaded.threshold == 0.4
    assert np.allclose(detect(loaded, spec).logits, detect(detector, spec).logits, atol=1e-6)
    assert np.allclose(embed(loaded, spec), embed(detector, spec), atol=1e-6)


def test_encoder_checkpoint_is_not_a_detector(tmp_path):
    path = save_encoder(tmp_path / "encoder.pbc", AudioEncoder(4), STATS, accuracy=0.5)
    encoder, meta = load_encoder(path)
    assert encoder.classes == 4
    assert meta["accuracy"] == 0.5
    with pytest.raises(ConfigurationError):
        load_detector(path)
