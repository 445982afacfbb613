"""Observation encoders and the click detector."""
from pressbench.percept.corpus import (
    EVENT_CLASSES,
    DetectorWindows,
    EventCorpus,
    SpectrogramDataset,
    build_detector_windows,
    split_episodes,
    synthetic_event_corpus,
)
from pressbench.percept.detector import (
    ClickDetector,
    Detection,
    DetectorMetrics,
    detect,
    embed,
    eval_detector,
    finetune_click_detector,
    load_detector,
    load_encoder,
    metrics_from_predictions,
    pretrain_audio,
    save_detector,
    save_encoder,
)
from pressbench.percept.encoders import FEATURE_DIM, AudioEncoder, VisionEncoder, encode_image

__all__ = [
    "EVENT_CLASSES",
    "FEATURE_DIM",
    "AudioEncoder",
    "ClickDetector",
    "Detection",
    "DetectorMetrics",
    "DetectorWindows",
    "EventCorpus",
    "SpectrogramDataset",
    "VisionEncoder",
    "build_detector_windows",
    "detect",
    "embed",
    "encode_image",
    "eval_detector",
    "finetune_click_detector",
    "load_detector",
    "load_encoder",
    "metrics_from_predictions",
    "pretrain_audio",
    "save_detector",
    "save_encoder",
    "split_episodes",
    "synthetic_event_corpus",
]
