"""Audio-conditioned diffusion policy."""
from pressbench.policy.conditioning import (
    Conditioning,
    audio_conditioning,
    audio_features,
    build_conditioning,
    conditioning_dim,
)
from pressbench.policy.denoiser import Denoiser, SinusoidalTimeEmbedding
from pressbench.policy.diffusion_policy import (
    ASSUMED_DEFAULTS,
    DiffusionPolicy,
    PolicyTrainResult,
    load_policy,
    reverse_chain,
    sample_action,
    save_policy,
    train_policy,
    training_loss,
)
from pressbench.policy.schedule import NoiseSchedule, make_schedule, q_sample

__all__ = [
    "ASSUMED_DEFAULTS",
    "Conditioning",
    "Denoiser",
    "DiffusionPolicy",
    "NoiseSchedule",
    "PolicyTrainResult",
    "SinusoidalTimeEmbedding",
    "audio_conditioning",
    "audio_features",
    "build_conditioning",
    "conditioning_dim",
    "load_policy",
    "make_schedule",
    "q_sample",
    "reverse_chain",
    "sample_action",
    "save_policy",
    "train_policy",
    "training_loss",
]
