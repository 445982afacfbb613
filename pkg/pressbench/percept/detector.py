"""Audio encoder pretraining and the instrumentation-supervised click detector."""
import copy
import json
import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict
from sklearn.metrics import confusion_matrix, f1_score
from torch import Tensor

from pressbench.config import DetectorTrainingConfig
from pressbench.dsp.spectrogram import SpecStats
from pressbench.errors import ConfigurationError
from pressbench.learn.checkpoint import load_checkpoint, load_into, save_checkpoint
from pressbench.learn.optim import AdamConfig
from pressbench.learn.trainer import seed_torch, train_epochs
from pressbench.percept.corpus import EventCorpus, SpectrogramDataset
from pressbench.percept.encoders import AudioEncoder

logger = logging.getLogger(__name__)

POSITIVE = 1


class DetectorMetrics(BaseModel):
    """Confusion counts and the derived F1 / false-negative rate."""

    tp: int
    fp: int
    tn: int
    fn: int
    f1: float
    false_negative_rate: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, tn: int, fn: int) -> "DetectorMetrics":
        denominator = 2 * tp + fp + fn
        return cls(
            tp=tp,
            fp=fp,
            tn=tn,
            fn=fn,
            f1=2 * tp / denominator if denominator else 0.0,
            false_negative_rate=fn / (tp + fn) if tp + fn else 0.0,
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_json(self) -> str:
        return json.dumps(self.model_dump(), indent=2, sort_keys=True)


def metrics_from_predictions(y_true: np.ndarray, y_pred: np.ndarray) -> DetectorMetrics:
    """DetectorMetrics of binary predictions against true labels."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.size == 0:
        raise ConfigurationError("cannot evaluate a detector on an empty test set")
    tn, fp, fn, tp = confusion_matrix(y_true, y_pred, labels=[0, 1]).ravel()
    metrics = DetectorMetrics.from_counts(int(tp), int(fp), int(tn), int(fn))
    sk_f1 = f1_score(y_true, y_pred, labels=[0, 1], pos_label=POSITIVE, zero_division=0)
    if abs(sk_f1 - metrics.f1) > 1e-12:
        logger.warning(f"F1 from counts ({metrics.f1}) disagrees with sklearn ({sk_f1})")
    return metrics


class ClickDetector(nn.Module):
    """Two-class audio encoder with a decision threshold on the positive probability."""

    def __init__(self, encoder: AudioEncoder, threshold: float = 0.5):
        super().__init__()
        if encoder.classes != 2:
            raise ConfigurationError(f"click detector needs a 2-class head, got {encoder.classes}")
        self.encoder = encoder
        self.threshold = threshold

    def forward(self, specs: Tensor) -> Tensor:
        return self.encoder(specs)

    def embed(self, specs: Tensor) -> Tensor:
        return self.encoder.embed(specs)


class Detection(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    state: int
    logits: np.ndarray
    prob: float


def _spec_tensor(spec: np.ndarray) -> Tensor:
    return torch.from_numpy(np.ascontiguousarray(spec, dtype=np.float32))


def decide(logits: Tensor, threshold: float) -> Tuple[Tensor, Tensor]:
    """Positive-class probability and thresholded state; a tie counts as positive."""
    prob = torch.softmax(logits, dim=-1)[..., POSITIVE]
    return prob, (prob >= threshold).long()


@torch.no_grad()
def detect(detector: ClickDetector, spec: np.ndarray) -> Detection:
    """Classify one normalized 298 x 128 spectrogram."""
    detector.eval()
    logits = detector(_spec_tensor(spec))[0]
    prob, state = decide(logits, detector.threshold)
    return Detection(state=int(state), logits=logits.numpy().astype(np.float64), prob=float(prob))


@torch.no_grad()
def embed(model: Union[ClickDetector, AudioEncoder], spec: np.ndarray) -> np.ndarray:
    """64-dim mean-pooled pre-head representation of one spectrogram."""
    model.eval()
    return model.embed(_spec_tensor(spec))[0].numpy()


@torch.no_grad()
def predict_probabilities(detector: ClickDetector, dataset: SpectrogramDataset, batch_size: int = 64) -> np.ndarray:
    detector.eval()
    probs: List[np.ndarray] = []
    for lo in range(0, len(dataset), batch_size):
        chunk = _spec_tensor(dataset.spectrograms[lo : lo + batch_size])
        probs.append(decide(detector(chunk), detector.threshold)[0].numpy())
    return np.concatenate(probs) if probs else np.zeros(0)


def eval_detector(detector: ClickDetector, dataset: SpectrogramDataset) -> DetectorMetrics:
    """Confusion counts, F1 and FN rate of a detector on a labelled test set."""
    probs = predict_probabilities(detector, dataset)
    return metrics_from_predictions(dataset.labels, (probs >= detector.threshold).astype(np.int64))


def _cross_entropy(module: nn.Module, batch) -> Tensor:
    specs, labels = batch
    return F.cross_entropy(module(specs), labels)


@torch.no_grad()
def _accuracy(encoder: AudioEncoder, dataset: SpectrogramDataset) -> float:
    encoder.eval()
    correct = 0
    for lo in range(0, len(dataset), 64):
        logits = encoder(_spec_tensor(dataset.spectrograms[lo : lo + 64]))
        correct += int((logits.argmax(dim=-1).numpy() == dataset.labels[lo : lo + 64]).sum())
    return correct / len(dataset) if len(dataset) else 0.0


class PretrainResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    encoder: AudioEncoder
    accuracy: float
    loss_curve: List[float]


def pretrain_audio(
    encoder: AudioEncoder,
    corpus: EventCorpus,
    epochs: int,
    lr: float,
    seed: int,
    cfg: Optional[DetectorTrainingConfig] = None,
) -> PretrainResult:
    """Classification-train the audio encoder on the synthetic event corpus.

    A quarter of the corpus is held out and the held-out accuracy reported.
    """
    cfg = cfg or DetectorTrainingConfig()
    dataset = corpus.dataset
    classes = dataset.classes
    if len(classes) < 2:
        raise ConfigurationError(f"pretraining needs at least 2 classes, got {len(classes)}")
    if encoder.classes != len(classes):
        encoder.reset_head(len(classes))

    order = np.random.default_rng(seed).permutation(len(dataset))
    n_val = max(1, int(round(len(dataset) * cfg.val_fraction)))
    held_out, train = dataset.subset(order[:n_val]), dataset.subset(order[n_val:])

    logger.info("=" * 60)
    logger.info(f"Pretraining audio encoder: {len(train)} train / {len(held_out)} held-out windows")
    logger.info("=" * 60)
    result = train_epochs(
        encoder,
        train,
        _cross_entropy,
        AdamConfig(lr=lr, weight_decay=cfg.weight_decay),
        epochs,
        seed,
        batch_size=cfg.batch_size,
        warmup_steps=cfg.warmup_steps,
    )
    accuracy = _accuracy(encoder, held_out)
    logger.info(f"Held-out accuracy: {accuracy:.3f}")
    return PretrainResult(encoder=encoder, accuracy=accuracy, loss_curve=result.loss_curve)


class FinetuneResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    detector: ClickDetector
    metrics: DetectorMetrics
    loss_curve: List[float]


def finetune_click_detector(
    pretrained: AudioEncoder,
    train: SpectrogramDataset,
    epochs: int = 10,
    lr: float = 1e-5,
    seed: int = 0,
    validation: Optional[SpectrogramDataset] = None,
    cfg: Optional[DetectorTrainingConfig] = None,
) -> FinetuneResult:
    """Fine-tune a copy of the pretrained encoder as a binary click detector.

    Args:
        pretrained: Pretrained encoder; left untouched
        train: Labelled windows (both classes required)
        epochs: Passes over ``train``; 0 returns pretrained body + fresh head
        lr: Encoder learning rate; the fresh head trains at ``lr * head_lr_multiplier``
        seed: Seeds head initialization and shuffling
        validation: Windows for the reported metrics (``train`` when None)
        cfg: Batch size, warmup, weight decay, threshold

    Returns:
        FinetuneResult with the detector and its validation metrics
    """
    cfg = cfg or DetectorTrainingConfig()
    if train.classes != [0, 1]:
        raise ConfigurationError(f"click-detector training needs both classes, got {train.classes}")

    encoder = copy.deepcopy(pretrained)
    seed_torch(seed)
    encoder.reset_head(2)
    detector = ClickDetector(encoder, threshold=cfg.threshold)
    groups = [
        {"params": list(encoder.body.parameters())},
        {"params": list(encoder.head.parameters()), "lr_scale": cfg.head_lr_multiplier},
    ]

    logger.info("=" * 60)
    logger.info(f"Fine-tuning click detector: {len(train)} windows, {epochs} epochs, lr={lr:.0e}")
    logger.info("=" * 60)
    result = train_epochs(
        detector,
        train,
        _cross_entropy,
        AdamConfig(lr=lr, weight_decay=cfg.weight_decay),
        epochs,
        seed,
        batch_size=cfg.batch_size,
        warmup_steps=cfg.warmup_steps,
        param_groups=groups,
    )
    metrics = eval_detector(detector, validation if validation is not None and len(validation) else train)
    logger.info(f"Detector F1={metrics.f1:.4f} FN rate={metrics.false_negative_rate:.4f}")
    return FinetuneResult(detector=detector, metrics=metrics, loss_curve=result.loss_curve)


def _encoder_header(encoder: AudioEncoder) -> dict:
    return {"body": encoder.body.spec, "head": encoder.head.spec, "classes": encoder.classes}


def save_encoder(path: Union[str, Path], encoder: AudioEncoder, stats: SpecStats, **meta) -> Path:
    header = {"kind": "audio_encoder", **_encoder_header(encoder), "spec_stats": stats.model_dump(), **meta}
    return save_checkpoint(path, {"encoder": encoder}, header)


def load_encoder(path: Union[str, Path]) -> Tuple[AudioEncoder, dict]:
    meta, arrays = load_checkpoint(path)
    if meta.get("kind") not in ("audio_encoder", "click_detector"):
        raise ConfigurationError(f"{path} is not an audio encoder checkpoint")
    encoder = AudioEncoder(meta["classes"], body=meta["body"], head=meta["head"])
    load_into(encoder, arrays, "encoder")
    encoder.eval()
    return encoder, meta


def save_detector(
    path: Union[str, Path], detector: ClickDetector, stats: SpecStats, metrics: Optional[DetectorMetrics] = None
) -> Path:
    header = {
        "kind": "click_detector",
        **_encoder_header(detector.encoder),
        "threshold": detector.threshold,
        "spec_stats": stats.model_dump(),
        "metrics": metrics.model_dump() if metrics else None,
    }
    return save_checkpoint(path, {"encoder": detector.encoder}, header)


def load_detector(path: Union[str, Path]) -> Tuple[ClickDetector, SpecStats]:
    encoder, meta = load_encoder(path)
    if meta["kind"] != "click_detector":
        raise ConfigurationError(f"{path} holds an encoder, not a click detector")
    return ClickDetector(encoder, threshold=meta["threshold"]), SpecStats(**meta["spec_stats"])
