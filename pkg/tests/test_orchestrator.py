"""Tests for the pipeline graph: stage order, outputs and resume."""
import json
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from pressbench import orchestrator
from pressbench.config import RunConfig, Variant, config_hash
from pressbench.data import EpisodeStore, Manifest
from pressbench.evaluation import RolloutResult, make_report
from pressbench.learn.checkpoint import load_checkpoint, save_checkpoint
from pressbench.stages import DETECTOR_FILE, ENCODER_FILE, METRICS_FILE, policy_file

VARIANTS = (Variant.FUSION_EMBED, Variant.SOFT_SENSOR)


@pytest.fixture
def calls(monkeypatch):
    """Replace the stages with fakes that write just enough for resume checks."""
    counter = Counter()

    def fake_collect(config, out_dir, threads=None):
        counter["collect"] += 1
        EpisodeStore(out_dir).write_manifest(Manifest(config_hash=config_hash(config), base_seed=config.seed))

    def fake_detector(config, dataset_dir, out_dir):
        counter["detector"] += 1
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / DETECTOR_FILE).write_bytes(b"")
        (out / ENCODER_FILE).write_bytes(b"")
        (out / METRICS_FILE).write_text(json.dumps({"config_hash": config_hash(config)}))

    def fake_policy(config, dataset_dir, out_dir, detector=None):
        counter[f"policy:{config.policy.variant.value}"] += 1
        assert Path(detector).name == "detector"
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        return save_checkpoint(out / policy_file(config.policy.variant), {}, {"config_hash": config_hash(config)})

    def fake_evaluate(config, policies, out_dir, expert_dataset=None, threads=None):
        counter["evaluate"] += 1
        assert Path(expert_dataset).name == "dataset"
        failure = RolloutResult(
            seed=0,
            success=False,
            pressed=False,
            force_trace=np.zeros((100, 3), np.float32),
            duration=0.1,
            start_height=0.1,
            final_height=0.1,
        )
        return make_report({Path(p).stem: [failure] for p in policies}, [3.0], out_dir=out_dir)

    monkeypatch.setattr(orchestrator, "run_collect", fake_collect)
    monkeypatch.setattr(orchestrator, "run_train_detector", fake_detector)
    monkeypatch.setattr(orchestrator, "run_train_policy", fake_policy)
    monkeypatch.setattr(orchestrator, "run_evaluate", fake_evaluate)
    return counter


def test_with_variant_only_changes_the_variant():
    config = RunConfig(seed=4)
    changed = orchestrator.with_variant(config, "soft-sensor")
    assert changed.policy.variant == Variant.SOFT_SENSOR
    assert changed.seed == 4
    assert config.policy.variant == Variant.FUSION_EMBED


def test_pipeline_runs_every_stage(tmp_path, calls):
    result = orchestrator.run_full_pipeline(RunConfig(), tmp_path, variants=VARIANTS)
    assert calls == Counter(
        {"collect": 1, "detector": 1, "policy:fusion-embed": 1, "policy:soft-sensor": 1, "evaluate": 1}
    )
    assert result["skipped"] == []
    assert [Path(p).name for p in result["policies"]] == ["policy_fusion-embed.pbc", "policy_soft-sensor.pbc"]
    assert sorted(result["report"]["ranking"]) == ["policy_fusion-embed", "policy_soft-sensor"]
    assert (tmp_path / "report" / "report.json").exists()


def test_policy_checkpoints_carry_their_variant_hash(tmp_path, calls):
    config = RunConfig()
    orchestrator.run_full_pipeline(config, tmp_path, variants=VARIANTS)
    meta, _ = load_checkpoint(tmp_path / "policies" / policy_file(Variant.SOFT_SENSOR))
    assert meta["config_hash"] == config_hash(orchestrator.with_variant(config, Variant.SOFT_SENSOR))


def test_resume_reuses_matching_outputs(tmp_path, calls):
    config = RunConfig()
    orchestrator.run_full_pipeline(config, tmp_path, variants=VARIANTS)
    result = orchestrator.run_full_pipeline(config, tmp_path, variants=VARIANTS, resume=True)
    assert result["skipped"] == ["collect", "train-detector", "train-policy:fusion-embed", "train-policy:soft-sensor"]
    assert calls["collect"] == 1
    assert calls["detector"] == 1
    assert calls["evaluate"] == 2
    assert len(result["policies"]) == 2


def test_resume_reruns_on_config_change(tmp_path, calls):
    orchestrator.run_full_pipeline(RunConfig(), tmp_path, variants=VARIANTS)
    result = orchestrator.run_full_pipeline(RunConfig(seed=1), tmp_path, variants=VARIANTS, resume=True)
    assert result["skipped"] == []
    assert calls["collect"] == 2
    assert calls["policy:soft-sensor"] == 2


def test_without_resume_everything_reruns(tmp_path, calls):
    orchestrator.run_full_pipeline(RunConfig(), tmp_path, variants=VARIANTS)
    orchestrator.run_full_pipeline(RunConfig(), tmp_path, variants=VARIANTS)
    assert calls["collect"] == 2
    assert calls["detector"] == 2
