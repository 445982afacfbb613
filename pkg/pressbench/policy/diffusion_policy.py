"""Conditional diffusion policy: training loss, reverse sampling, training loop, checkpoints."""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict
from torch import Tensor

from pressbench.config import MelConfig, PolicyTrainingConfig, RunConfig, Variant
from pressbench.data.augment import center_crop
from pressbench.data.batching import Batch, sample_batch
from pressbench.data.models import Episode, NormStats
from pressbench.data.normalization import denormalize
from pressbench.data.windows import window_spectrogram
from pressbench.dsp.spectrogram import SpecStats, log_mel, normalize_spec
from pressbench.dsp.streams import AudioRing, ring_window
from pressbench.errors import ConfigurationError
from pressbench.learn.checkpoint import load_checkpoint, load_into, save_checkpoint
from pressbench.learn.optim import AdamConfig, fit_schedule
from pressbench.learn.trainer import Trainer, seed_torch
from pressbench.percept.detector import ClickDetector
from pressbench.percept.encoders import AudioEncoder, VisionEncoder, image_tensor
from pressbench.policy.conditioning import (
    AudioModel,
    audio_conditioning,
    build_conditioning,
    check_audio_model,
    conditioning_dim,
)
from pressbench.policy.denoiser import ACTION_DIM, Denoiser
from pressbench.policy.schedule import NoiseSchedule, make_schedule, q_sample

logger = logging.getLogger(__name__)

# design choices without a published value; copied into evaluation reports
ASSUMED_DEFAULTS = {
    "diffusion_steps": 50,
    "denoiser": "3-layer MLP, width 256, sinusoidal timestep embedding 32",
    "observation_horizon": 1,
    "parameterization": "epsilon",
    "schedule": "squared cosine, s=0.008",
}


class DiffusionPolicy(nn.Module):
    """Vision encoder + denoiser, conditioned per variant on a frozen audio model."""

    def __init__(
        self,
        variant: Variant,
        norm: NormStats,
        audio_model: Optional[AudioModel],
        audio_stats: SpecStats,
        cfg: Optional[PolicyTrainingConfig] = None,
        mel: Optional[MelConfig] = None,
        crop_size: int = 86,
        vision: Optional[VisionEncoder] = None,
        denoiser: Optional[Denoiser] = None,
    ):
        super().__init__()
        cfg = cfg or PolicyTrainingConfig()
        self.variant = Variant(variant)
        self.norm = norm
        self.audio_stats = audio_stats
        self.mel = mel or MelConfig()
        self.crop_size = crop_size
        self.soft_sensor_latency = cfg.soft_sensor_latency
        self.schedule: NoiseSchedule = make_schedule(cfg.diffusion_steps)
        self.vision = vision or VisionEncoder(crop=crop_size)
        self.denoiser = denoiser or Denoiser(conditioning_dim(self.variant), cfg.hidden_dim, cfg.time_embed_dim)
        if audio_model is not None:
            check_audio_model(self.variant, audio_model)
            for p in audio_model.parameters():
                p.requires_grad_(False)
            audio_model.eval()
        # not a registered submodule: absent from state_dict() and parameters()
        self.__dict__["audio_model"] = audio_model

    def trainable_parameters(self) -> List[nn.Parameter]:
        return list(self.vision.parameters()) + list(self.denoiser.parameters())

    def condition(self, images: Tensor, audio_cond: Tensor) -> Tensor:
        return torch.cat([self.vision(images), audio_cond], dim=-1)

    def denormalize_action(self, action: np.ndarray) -> np.ndarray:
        """Normalized action to a displacement in metres (float32)."""
        return denormalize(action, self.norm.action_min, self.norm.action_max).astype(np.float32)

    def audio_spectrogram(self, ring: AudioRing, t: float) -> Optional[np.ndarray]:
        """Normalized window for this variant at observation time ``t``."""
        if self.variant == Variant.SOFT_SENSOR:
            t = t - self.soft_sensor_latency
        window = ring_window(ring, t, self.mel.window_seconds)
        return normalize_spec(log_mel(window, self.mel), self.audio_stats).values


def _tensor(array: np.ndarray) -> Tensor:
    return torch.from_numpy(np.ascontiguousarray(array, dtype=np.float32))


def training_loss(
    policy: DiffusionPolicy,
    batch: Batch,
    audio_cond: np.ndarray,
    generator: Optional[torch.Generator] = None,
    noise: Optional[Tensor] = None,
    timesteps: Optional[Tensor] = None,
) -> Tensor:
    """Epsilon-prediction MSE over a batch.

    Args:
        policy: Policy being trained
        batch: Batch from ``sample_batch``
        audio_cond: (B, A) audio conditioning; for SoftSensor the true button state
        generator: Draws the timesteps (uniform in [1, T]) and the noise
        noise: Override of the sampled noise
        timesteps: Override of the sampled timesteps

    Returns:
        Scalar loss
    """
    actions = _tensor(batch.actions)
    size = actions.shape[0]
    if timesteps is None:
        timesteps = torch.randint(1, policy.schedule.T + 1, (size,), generator=generator)
    if noise is None:
        noise = torch.randn(actions.shape, generator=generator)
    noisy = q_sample(policy.schedule, actions, timesteps, noise)
    cond = policy.condition(image_tensor(batch.images), _tensor(audio_cond).reshape(size, -1))
    return F.mse_loss(policy.denoiser(noisy, timesteps, cond), noise)


@torch.no_grad()
def reverse_chain(
    policy: DiffusionPolicy, cond: Tensor, generator: Optional[torch.Generator] = None, record: bool = False
) -> Tuple[Tensor, List[Tensor]]:
    """DDPM reverse process from pure noise.

    Each step estimates the clean action from the predicted noise, clips that
    estimate to [-1, 1], and draws from the posterior around it. The sample
    itself is clamped to [-1, 1] after every update.
    """
    schedule = policy.schedule
    sample = torch.randn((cond.shape[0], ACTION_DIM), generator=generator)
    history: List[Tensor] = []
    for t in range(schedule.T, 0, -1):
        step = torch.full((cond.shape[0],), t, dtype=torch.long)
        eps = policy.denoiser(sample, step, cond)
        alpha_bar = float(schedule.alpha_bar[t])
        start = ((sample - float(np.sqrt(1.0 - alpha_bar)) * eps) / float(np.sqrt(alpha_bar))).clamp(-1.0, 1.0)
        w_start, w_current = schedule.posterior_coefficients(t)
        mean = w_start * start + w_current * sample
        if t > 1:
            sigma = float(np.sqrt(schedule.posterior_variance(t)))
            mean = mean + sigma * torch.randn(mean.shape, generator=generator)
        sample = mean.clamp(-1.0, 1.0)
        if record:
            history.append(sample.clone())
    return sample, history


@torch.no_grad()
def sample_action(
    policy: DiffusionPolicy,
    image: np.ndarray,
    spectrogram: Optional[np.ndarray],
    generator: Optional[torch.Generator] = None,
) -> np.ndarray:
    """One normalized action in [-1, 1]^3 for a 96 x 96 x 3 image and the variant's audio window."""
    policy.eval()
    vision = policy.vision(image_tensor(center_crop(image, policy.crop_size)))[0].numpy()
    cond = build_conditioning(policy.variant, vision, spectrogram, policy.audio_model)
    sample, _ = reverse_chain(policy, _tensor(cond.vector)[None], generator)
    return sample[0].numpy().astype(np.float64)


def _audio_cache(
    episodes: Sequence[Episode], policy: DiffusionPolicy, batch_size: int = 64
) -> List[np.ndarray]:
    """Frozen audio conditioning of every (episode, step); the button state for SoftSensor."""
    if policy.variant == Variant.SOFT_SENSOR:
        return [
            audio_conditioning(policy.variant, None, None, privileged_state=e.button_state, training=True)
            for e in episodes
        ]
    cache = []
    for episode in episodes:
        rows = []
        for lo in range(0, len(episode), batch_size):
            specs = np.stack(
                [
                    window_spectrogram(episode, i, policy.mel, policy.audio_stats)
                    for i in range(lo, min(lo + batch_size, len(episode)))
                ]
            )
            rows.append(audio_conditioning(policy.variant, specs, policy.audio_model))
        cache.append(np.concatenate(rows))
    logger.info(f"Cached frozen audio features for {sum(len(c) for c in cache)} steps")
    return cache


class PolicyTrainResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    policy: DiffusionPolicy
    loss_curve: List[float]


def train_policy(
    episodes: Sequence[Episode],
    norm: NormStats,
    variant: Variant,
    audio_model: Optional[AudioModel],
    audio_stats: SpecStats,
    config: Optional[RunConfig] = None,
    seed: int = 0,
    steps: Optional[int] = None,
) -> PolicyTrainResult:
    """Train a diffusion policy of one variant on a demonstration dataset.

    Args:
        episodes: Demonstrations
        norm: Dataset normalization statistics
        variant: Audio integration strategy
        audio_model: Pretrained encoder (generic) or fine-tuned detector; frozen
        audio_stats: Spectrogram moments the audio model was trained with
        config: Run configuration
        seed: Seeds initialization, batch sampling, augmentation and noise
        steps: Override of ``config.policy.steps``

    Returns:
        PolicyTrainResult with the per-step loss curve
    """
    config = config or RunConfig()
    cfg = config.policy
    steps = cfg.steps if steps is None else steps
    if not any(len(e) for e in episodes):
        raise ConfigurationError("cannot train a policy on an empty dataset")

    generator = seed_torch(seed)
    rng = np.random.default_rng(seed)
    policy = DiffusionPolicy(
        variant, norm, audio_model, audio_stats, cfg=cfg, mel=config.mel, crop_size=config.augment.crop_size
    )
    cache = _audio_cache(episodes, policy)
    trainer = Trainer(
        policy.trainable_parameters(),
        AdamConfig(lr=cfg.lr, weight_decay=cfg.weight_decay),
        fit_schedule(cfg.lr, cfg.warmup_steps, steps),
    )

    logger.info("=" * 60)
    logger.info(f"Training {policy.variant.display_name} policy for {steps} steps (seed {seed})")
    logger.info("=" * 60)
    policy.train()
    curve: List[float] = []
    for i in range(steps):
        batch = sample_batch(
            episodes, cfg.batch_size, rng, norm, config.mel, config.augment, include_spectrograms=False
        )
        audio_cond = np.stack([cache[e][t] for e, t in batch.indices])
        curve.append(trainer.step(training_loss(policy, batch, audio_cond, generator)))
        if (i + 1) % cfg.log_every == 0:
            recent = curve[-cfg.log_every :]
            logger.info(f"Step {i + 1}/{steps}: loss={sum(recent) / len(recent):.5f} lr={trainer.lr:.2e}")
    policy.eval()
    return PolicyTrainResult(policy=policy, loss_curve=curve)


def save_policy(path: Union[str, Path], policy: DiffusionPolicy, **meta) -> Path:
    """Checkpoint with vision encoder, denoiser, frozen audio model, variant and statistics."""
    modules: Dict[str, nn.Module] = {"vision": policy.vision, "denoiser": policy.denoiser}
    audio = policy.audio_model
    encoder = audio.encoder if isinstance(audio, ClickDetector) else audio
    header = {
        "kind": "policy",
        "variant": policy.variant.value,
        "vision": policy.vision.spec,
        "denoiser": policy.denoiser.net.spec,
        "cond_dim": policy.denoiser.cond_dim,
        "time_embed_dim": policy.denoiser.time_dim,
        "diffusion_steps": policy.schedule.T,
        "crop_size": policy.crop_size,
        "soft_sensor_latency": policy.soft_sensor_latency,
        "norm": policy.norm.model_dump(mode="json"),
        "spec_stats": policy.audio_stats.model_dump(),
        "mel": policy.mel.model_dump(mode="json"),
        "audio": None,
        **meta,
    }
    if encoder is not None:
        modules["audio"] = encoder
        header["audio"] = {
            "body": encoder.body.spec,
            "head": encoder.head.spec,
            "classes": encoder.classes,
            "threshold": audio.threshold if isinstance(audio, ClickDetector) else None,
        }
    return save_checkpoint(path, modules, header)


def load_policy(path: Union[str, Path]) -> DiffusionPolicy:
    meta, arrays = load_checkpoint(path)
    if meta.get("kind") != "policy":
        raise ConfigurationError(f"{path} is not a policy checkpoint")
    variant = Variant(meta["variant"])
    audio_model: Optional[AudioModel] = None
    if meta["audio"] is not None:
        spec = meta["audio"]
        encoder = load_into(AudioEncoder(spec["classes"], body=spec["body"], head=spec["head"]), arrays, "audio")
        audio_model = ClickDetector(encoder, spec["threshold"]) if spec["threshold"] is not None else encoder
    vision = load_into(VisionEncoder(spec=meta["vision"], crop=meta["crop_size"]), arrays, "vision")
    denoiser = Denoiser(meta["cond_dim"], time_dim=meta["time_embed_dim"], spec=meta["denoiser"])
    load_into(denoiser, arrays, "denoiser")
    cfg = PolicyTrainingConfig(
        variant=variant,
        diffusion_steps=meta["diffusion_steps"],
        time_embed_dim=meta["time_embed_dim"],
        soft_sensor_latency=meta["soft_sensor_latency"],
    )
    policy = DiffusionPolicy(
        variant,
        NormStats.model_validate(meta["norm"]),
        audio_model,
        SpecStats(**meta["spec_stats"]),
        cfg=cfg,
        mel=MelConfig(**meta["mel"]),
        crop_size=meta["crop_size"],
        vision=vision,
        denoiser=denoiser,
    )
    policy.eval()
    logger.info(f"Loaded {variant.display_name} policy from {path}")
    return policy
