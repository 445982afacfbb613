"""Pipeline stages: collect, train-detector, train-policy, evaluate.

Each stage reads its inputs from disk, writes its outputs under one directory,
and returns what it wrote. The CLI and the pipeline graph both call these.
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from pressbench.config import RunConfig, Variant, config_hash, get_runtime_settings
from pressbench.data import EpisodeStore, Manifest, ScriptedExpert, collect
from pressbench.dsp.spectrogram import SpecStats
from pressbench.errors import ConfigurationError, DatasetError
from pressbench.evaluation import EvalReport, PolicyController, make_report, run_rollouts
from pressbench.learn.trainer import seed_torch
from pressbench.percept import (
    EVENT_CLASSES,
    AudioEncoder,
    DetectorMetrics,
    build_detector_windows,
    finetune_click_detector,
    load_detector,
    load_encoder,
    pretrain_audio,
    save_detector,
    save_encoder,
    split_episodes,
    synthetic_event_corpus,
)
from pressbench.policy import ASSUMED_DEFAULTS, load_policy, save_policy, train_policy

logger = logging.getLogger(__name__)

ENCODER_FILE = "pretrained_encoder.pbc"
DETECTOR_FILE = "detector.pbc"
METRICS_FILE = "metrics.json"


def policy_file(variant: Variant) -> str:
    return f"policy_{Variant(variant).value}.pbc"


def load_dataset(dataset_dir: Union[str, Path]) -> Tuple[Manifest, list]:
    store = EpisodeStore(dataset_dir)
    manifest = store.read_manifest()
    if manifest.norm is None or not manifest.episodes:
        raise DatasetError(f"{dataset_dir} holds no episodes")
    return manifest, store.load_all()


def run_collect(config: RunConfig, out_dir: Union[str, Path], threads: Optional[int] = None) -> Manifest:
    """Collect ``config.collection.episodes`` demonstrations seeded from ``config.seed``."""
    return collect(config.collection.episodes, out_dir, config.seed, config, threads=threads)


def pretrain_encoder(config: RunConfig, epochs: Optional[int] = None) -> Tuple[AudioEncoder, SpecStats, float]:
    """Pretrain an audio encoder on the synthetic event corpus."""
    cfg = config.detector
    corpus = synthetic_event_corpus(cfg.pretrain_per_class, config.mel, config.seed)
    seed_torch(config.seed)
    encoder = AudioEncoder(len(EVENT_CLASSES))
    result = pretrain_audio(
        encoder,
        corpus,
        cfg.pretrain_epochs if epochs is None else epochs,
        cfg.pretrain_lr,
        config.seed,
        cfg,
    )
    return result.encoder, corpus.stats, result.accuracy


def run_train_detector(
    config: RunConfig,
    dataset_dir: Union[str, Path],
    out_dir: Union[str, Path],
    pretrain_epochs: Optional[int] = None,
) -> DetectorMetrics:
    """Pretrain the audio encoder, fine-tune the click detector, write both plus metrics.

    Validation windows come from a held-out set of episodes at stride 1.

    Args:
        config: Run configuration (``config.detector`` holds the budgets)
        dataset_dir: Collected dataset
        out_dir: Receives ``pretrained_encoder.pbc``, ``detector.pbc`` and ``metrics.json``
        pretrain_epochs: Override of ``config.detector.pretrain_epochs``

    Returns:
        Validation metrics of the fine-tuned detector
    """
    cfg = config.detector
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest, episodes = load_dataset(dataset_dir)
    digest = config_hash(config)

    encoder, corpus_stats, accuracy = pretrain_encoder(config, pretrain_epochs)
    save_encoder(out / ENCODER_FILE, encoder, corpus_stats, accuracy=accuracy, seed=config.seed, config_hash=digest)

    stats = manifest.norm.spec
    train_ids, val_ids = split_episodes(len(episodes), cfg.val_fraction, config.seed)
    train = build_detector_windows(episodes, config.mel, stats, cfg.window_stride, train_ids)
    validation = build_detector_windows(episodes, config.mel, stats, 1, val_ids)
    result = finetune_click_detector(
        encoder,
        train.dataset,
        epochs=cfg.finetune_epochs,
        lr=cfg.finetune_lr,
        seed=config.seed,
        validation=validation.dataset,
        cfg=cfg,
    )
    save_detector(out / DETECTOR_FILE, result.detector, stats, result.metrics)

    report = {
        **result.metrics.model_dump(),
        "pretrain_accuracy": accuracy,
        "train_windows": len(train.dataset),
        "validation_windows": len(validation.dataset),
        "epochs": cfg.finetune_epochs,
        "lr": cfg.finetune_lr,
        "seed": config.seed,
        "config_hash": digest,
    }
    (out / METRICS_FILE).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    logger.info(f"✅ Wrote detector and metrics to {out}")
    return result.metrics


def resolve_audio_model(
    variant: Variant,
    config: RunConfig,
    detector: Union[str, Path, None] = None,
    encoder: Union[str, Path, None] = None,
):
    """Audio model and the spectrogram moments it was trained with, for one variant.

    ``detector`` may be a detector checkpoint or the train-detector output directory.
    The generic variant uses the pretrained encoder; when handed a detector it falls
    back to the ``pretrained_encoder.pbc`` beside it, and with neither given it
    pretrains one in-process.
    """
    variant = Variant(variant)
    detector_path = Path(detector) if detector is not None else None
    if detector_path is not None and detector_path.is_dir():
        detector_path = detector_path / DETECTOR_FILE

    if variant == Variant.GENERIC_EMBED:
        if encoder is None and detector_path is not None:
            logger.warning(
                "GenericEmbed conditions on the pretrained encoder; "
                f"ignoring the fine-tuned detector {detector_path}"
            )
            encoder = detector_path.parent / ENCODER_FILE
        if encoder is None:
            logger.info("No pretrained encoder given, pretraining one")
            model, stats, _ = pretrain_encoder(config)
            return model, stats
        model, meta = load_encoder(encoder)
        return model, SpecStats(**meta["spec_stats"])

    if detector_path is None:
        raise ConfigurationError(f"the {variant.value} variant needs a fine-tuned click detector")
    model, stats = load_detector(detector_path)
    return model, stats


def run_train_policy(
    config: RunConfig,
    dataset_dir: Union[str, Path],
    out_dir: Union[str, Path],
    detector: Union[str, Path, None] = None,
    encoder: Union[str, Path, None] = None,
    steps: Optional[int] = None,
) -> Path:
    """Train one policy variant (``config.policy.variant``) and write its checkpoint.

    Returns:
        Path of the written ``policy_<variant>.pbc``
    """
    variant = config.policy.variant
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest, episodes = load_dataset(dataset_dir)
    audio_model, audio_stats = resolve_audio_model(variant, config, detector, encoder)

    result = train_policy(
        episodes, manifest.norm, variant, audio_model, audio_stats, config=config, seed=config.seed, steps=steps
    )
    curve = result.loss_curve
    path = save_policy(
        out / policy_file(variant),
        result.policy,
        seed=config.seed,
        config_hash=config_hash(config),
        steps=len(curve),
        final_loss=float(np.mean(curve[-50:])) if curve else None,
    )
    (out / f"loss_{variant.value}.json").write_text(json.dumps({"variant": variant.value, "loss": curve}) + "\n")
    logger.info(f"✅ Wrote {variant.display_name} policy to {path}")
    return path


def expert_reference(episodes: Sequence) -> Tuple[List[float], List[float]]:
    """Per-episode peak F_z and per-step contact peaks of expert demonstrations."""
    peaks = [float(e.peak_fz.max()) for e in episodes]
    trace = [float(x) for e in episodes for x in e.peak_fz[e.peak_fz > 0.0]]
    return peaks, trace


def run_evaluate(
    config: RunConfig,
    policies: Sequence[Union[str, Path]],
    out_dir: Union[str, Path],
    expert_dataset: Union[str, Path, None] = None,
    threads: Optional[int] = None,
) -> EvalReport:
    """Roll out each policy, compare to the expert reference, and write the report.

    Without an expert dataset the scripted expert is rolled out on the same seeds
    and its successful rollouts form the reference.
    """
    cfg = config.evaluation
    threads = threads or get_runtime_settings().threads
    sim = config.sim

    results: Dict[str, list] = {}
    for path in policies:
        policy = load_policy(path)
        name = policy.variant.display_name
        if name in results:
            name = f"{name}:{Path(path).stem}"
        logger.info("=" * 60)
        logger.info(f"EVALUATING {name}: {cfg.rollouts} rollouts from seed {cfg.base_seed}")
        logger.info("=" * 60)
        results[name] = run_rollouts(
            lambda: PolicyController(policy, sim, name), cfg.rollouts, cfg.base_seed, sim, cfg, threads
        )

    if expert_dataset is not None:
        _, episodes = load_dataset(expert_dataset)
        peaks, trace = expert_reference(episodes)
        source = str(expert_dataset)
    else:
        logger.info("No expert dataset given, rolling out the scripted expert as reference")
        expert_runs = run_rollouts(
            lambda: ScriptedExpert(sim, config.collection), cfg.rollouts, cfg.base_seed, sim, cfg, threads
        )
        successes = [r for r in expert_runs if r.success]
        peaks = [float(r.peak_fz) for r in successes]
        trace = [float(x) for r in successes for x in r.step_peaks(sim.substeps)]
        source = "scripted expert rollouts"

    metadata = {
        "rollouts": cfg.rollouts,
        "base_seed": cfg.base_seed,
        "seeds": [cfg.base_seed + i for i in range(cfg.rollouts)],
        "config_hash": config_hash(config),
        "policies": [str(p) for p in policies],
        "expert_reference": source,
        "assumed_defaults": ASSUMED_DEFAULTS,
    }
    return make_report(
        results,
        peaks,
        cfg,
        metadata=metadata,
        out_dir=out_dir,
        expert_trace_samples=trace,
        substeps=sim.substeps,
    )
