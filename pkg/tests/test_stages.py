"""Tests for the pipeline stages and audio-model resolution."""
import json
import logging

import numpy as np
import pytest

from pressbench.config import (
    CollectionConfig,
    DetectorTrainingConfig,
    EvaluationConfig,
    PolicyTrainingConfig,
    RunConfig,
    Variant,
)
from pressbench.dsp import SpecStats
from pressbench.errors import ConfigurationError, DatasetError
from pressbench.evaluation import REPORT_NAME, load_report
from pressbench.percept import AudioEncoder, ClickDetector, save_detector, save_encoder
from pressbench.stages import (
    DETECTOR_FILE,
    ENCODER_FILE,
    METRICS_FILE,
    expert_reference,
    load_dataset,
    policy_file,
    resolve_audio_model,
    run_evaluate,
    run_train_detector,
    run_train_policy,
)
from tests.conftest import make_episode

ENCODER_STATS = SpecStats(mean=-8.0, std=4.0)
DETECTOR_STATS = SpecStats(mean=-9.0, std=3.0)


@pytest.fixture
def detector_dir(tmp_path):
    save_encoder(tmp_path / ENCODER_FILE, AudioEncoder(4), ENCODER_STATS)
    save_detector(tmp_path / DETECTOR_FILE, ClickDetector(AudioEncoder(2)), DETECTOR_STATS)
    return tmp_path


def test_policy_file_names():
    assert policy_file(Variant.FUSION_LOGITS) == "policy_fusion-logits.pbc"
    assert policy_file("generic") == "policy_generic.pbc"


def test_detector_variants_load_the_detector(detector_dir):
    model, stats = resolve_audio_model(Variant.FUSION_EMBED, RunConfig(), detector=detector_dir)
    assert isinstance(model, ClickDetector)
    assert stats == DETECTOR_STATS
    model, _ = resolve_audio_model(Variant.SOFT_SENSOR, RunConfig(), detector=detector_dir / DETECTOR_FILE)
    assert isinstance(model, ClickDetector)


def test_detector_variants_need_a_detector():
    with pytest.raises(ConfigurationError):
        resolve_audio_model(Variant.FUSION_LOGITS, RunConfig())


def test_generic_falls_back_to_sibling_encoder(detector_dir, caplog):
    with caplog.at_level(logging.WARNING, logger="pressbench.stages"):
        model, stats = resolve_audio_model(Variant.GENERIC_EMBED, RunConfig(), detector=detector_dir)
    assert isinstance(model, AudioEncoder)
    assert model.classes == 4
    assert stats == ENCODER_STATS
    assert any("ignoring the fine-tuned detector" in r.getMessage() for r in caplog.records)


def test_generic_prefers_explicit_encoder(detector_dir, caplog):
    with caplog.at_level(logging.WARNING, logger="pressbench.stages"):
        model, _ = resolve_audio_model(Variant.GENERIC_EMBED, RunConfig(), encoder=detector_dir / ENCODER_FILE)
    assert isinstance(model, AudioEncoder)
    assert not caplog.records


def test_expert_reference():
    a = make_episode(steps=4)
    a.peak_fz[:] = [0.0, 1.0, 3.0, 0.0]
    b = make_episode(steps=3)
    b.peak_fz[:] = [0.0, 2.0, 0.0]
    peaks, trace = expert_reference([a, b])
    assert peaks == [3.0, 2.0]
    assert trace == [1.0, 3.0, 2.0]


def test_load_dataset_needs_a_manifest(tmp_path):
    with pytest.raises(DatasetError):
        load_dataset(tmp_path)


@pytest.mark.slow
def test_stages_end_to_end(tiny_dataset, tmp_path):
    root, _, _ = tiny_dataset
    config = RunConfig(
        collection=CollectionConfig(episodes=3),
        detector=DetectorTrainingConfig(pretrain_per_class=2, pretrain_epochs=1, finetune_epochs=1, batch_size=16),
        policy=PolicyTrainingConfig(
            variant=Variant.GENERIC_EMBED, diffusion_steps=5, hidden_dim=32, batch_size=4, log_every=1
        ),
        evaluation=EvaluationConfig(rollouts=2, max_duration=0.5),
    )

    metrics = run_train_detector(config, root, tmp_path / "detector")
    written = json.loads((tmp_path / "detector" / METRICS_FILE).read_text())
    assert written["tp"] == metrics.tp
    assert written["validation_windows"] > 0
    assert (tmp_path / "detector" / ENCODER_FILE).exists()

    path = run_train_policy(config, root, tmp_path / "policies", detector=tmp_path / "detector", steps=3)
    assert path.name == "policy_generic.pbc"
    loss = json.loads((tmp_path / "policies" / "loss_generic.json").read_text())
    assert len(loss["loss"]) == 3

    report = run_evaluate(config, [path], tmp_path / "report", expert_dataset=root, threads=1)
    assert report.ranking == ["GenericEmbed"]
    assert report.variant("GenericEmbed").trials == 2
    assert report.metadata["seeds"] == [100000, 100001]
    assert report.metadata["expert_reference"] == str(root)
    assert "assumed_defaults" in report.metadata
    assert np.isclose(report.expert.peak_fz_median, np.median(report.expert.peak_fz))
    assert load_report(tmp_path / "report" / REPORT_NAME) == report
