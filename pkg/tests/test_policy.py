"""Tests for the noise schedule, conditioning variants and the diffusion policy."""
import numpy as np
import pytest
import torch
import torch.nn as nn

from pressbench.config import MelConfig, PolicyTrainingConfig, RunConfig, Variant
from pressbench.data import center_crop, compute_norm_stats, sample_batch
from pressbench.data.batching import Batch
from pressbench.data.models import NormStats
from pressbench.dsp import SpecStats
from pressbench.errors import ConfigurationError, DomainError, PrivilegedLeakError
from pressbench.percept import AudioEncoder, ClickDetector
from pressbench.percept.encoders import image_tensor
from pressbench.policy import (
    DiffusionPolicy,
    audio_conditioning,
    build_conditioning,
    conditioning_dim,
    load_policy,
    make_schedule,
    q_sample,
    reverse_chain,
    sample_action,
    save_policy,
    train_policy,
    training_loss,
)
from tests.conftest import make_episode

STATS = SpecStats(mean=-10.0, std=5.0)
SMALL = PolicyTrainingConfig(diffusion_steps=10, hidden_dim=32, batch_size=8)


@pytest.fixture(scope="module")
def episodes():
    return [make_episode(steps=12, seed=s, press_at=6) for s in range(2)]


@pytest.fixture(scope="module")
def norm(episodes):
    return compute_norm_stats(episodes, MelConfig())


def _detector():
    torch.manual_seed(0)
    return ClickDetector(AudioEncoder(2))


def test_schedule_shape():
    schedule = make_schedule(50)
    assert schedule.T == 50
    assert schedule.betas.shape == (50,)
    assert schedule.alpha_bar.shape == (51,)
    assert schedule.alpha_bar[0] == 1.0
    assert np.all(np.diff(schedule.alpha_bar) < 0)
    assert np.all(schedule.betas <= 0.999)
    assert schedule.alpha_bar[-1] < 1e-3
    assert np.allclose(schedule.alpha_bar[1:], np.cumprod(1.0 - schedule.betas))


def test_schedule_rejects_zero_steps():
    with pytest.raises(ConfigurationError):
        make_schedule(0)


def test_first_step_posterior_is_deterministic():
    schedule = make_schedule(50)
    assert schedule.posterior_variance(1) == 0.0
    assert 0.0 < schedule.posterior_variance(25) < schedule.beta(25)


def test_q_sample():
    schedule = make_schedule(50)
    a0, eps = np.array([0.5, -0.5, 0.0]), np.array([1.0, 1.0, 1.0])
    noisy = q_sample(schedule, a0, 10, eps)
    ab = schedule.alpha_bar[10]
    assert np.allclose(noisy, np.sqrt(ab) * a0 + np.sqrt(1 - ab) * eps)
    batch = q_sample(schedule, torch.zeros(4, 3), torch.tensor([1, 2, 3, 50]), torch.ones(4, 3))
    assert batch.shape == (4, 3)
    assert batch[3, 0].item() > batch[0, 0].item()
    for bad in (0, 51):
        with pytest.raises(DomainError):
            q_sample(schedule, a0, bad, eps)


def test_conditioning_dims():
    assert conditioning_dim(Variant.GENERIC_EMBED) == 128
    assert conditioning_dim(Variant.FUSION_LOGITS) == 66
    assert conditioning_dim(Variant.FUSION_EMBED) == 128
    assert conditioning_dim(Variant.SOFT_SENSOR) == 65


def test_soft_sensor_training_uses_true_state():
    cond = build_conditioning(Variant.SOFT_SENSOR, np.zeros(64), None, None, privileged_state=1, training=True)
    assert len(cond) == 65
    assert cond.vector[-1] == 1.0
    with pytest.raises(ConfigurationError):
        build_conditioning(Variant.SOFT_SENSOR, np.zeros(64), None, None, training=True)


def test_privileged_state_never_reaches_inference():
    with pytest.raises(PrivilegedLeakError):
        build_conditioning(Variant.SOFT_SENSOR, np.zeros(64), np.zeros((298, 128)), _detector(), privileged_state=1)
    with pytest.raises(PrivilegedLeakError):
        build_conditioning(
            Variant.FUSION_EMBED, np.zeros(64), np.zeros((298, 128)), _detector(), privileged_state=0, training=True
        )


def test_variants_take_the_right_audio_model():
    spec = np.zeros((298, 128), np.float32)
    with pytest.raises(ConfigurationError):
        build_conditioning(Variant.GENERIC_EMBED, np.zeros(64), spec, _detector())
    with pytest.raises(ConfigurationError):
        build_conditioning(Variant.FUSION_LOGITS, np.zeros(64), spec, AudioEncoder(4))


@pytest.mark.parametrize(
    "variant,audio_len", [(Variant.FUSION_LOGITS, 2), (Variant.FUSION_EMBED, 64), (Variant.SOFT_SENSOR, 1)]
)
def test_inference_conditioning(variant, audio_len):
    cond = build_conditioning(variant, np.zeros(64), np.zeros((298, 128), np.float32), _detector())
    assert cond.audio.shape == (audio_len,)
    assert len(cond) == conditioning_dim(variant)
    if variant == Variant.SOFT_SENSOR:
        assert cond.audio[0] in (0.0, 1.0)


def test_batched_conditioning_matches_single_windows():
    detector = _detector()
    specs = np.random.default_rng(2).normal(size=(3, 298, 128)).astype(np.float32)
    vision = np.random.default_rng(3).normal(size=(3, 64)).astype(np.float32)
    batched = build_conditioning(Variant.FUSION_LOGITS, vision, specs, detector)
    assert batched.vector.shape == (3, 66)
    assert len(batched) == 66
    singles = np.stack(
        [build_conditioning(Variant.FUSION_LOGITS, vision[i], specs[i], detector).vector for i in range(3)]
    )
    assert np.allclose(batched.vector, singles, atol=1e-5)
    with pytest.raises(ConfigurationError, match="batching"):
        build_conditioning(Variant.FUSION_LOGITS, vision[0], specs, detector)


def test_soft_sensor_training_states_become_a_column():
    states = np.array([0, 1, 1], np.uint8)
    audio = audio_conditioning(Variant.SOFT_SENSOR, None, None, privileged_state=states, training=True)
    assert audio.shape == (3, 1)
    assert audio.dtype == np.float32
    assert audio[:, 0].tolist() == [0.0, 1.0, 1.0]


def test_sample_action_conditions_through_build_conditioning(norm):
    policy = DiffusionPolicy(Variant.FUSION_EMBED, norm, _detector(), STATS, cfg=SMALL)
    image = np.random.default_rng(4).integers(0, 256, (96, 96, 3), dtype=np.uint8)
    spec = np.random.default_rng(5).normal(size=(298, 128)).astype(np.float32)
    action = sample_action(policy, image, spec, torch.Generator().manual_seed(7))

    with torch.no_grad():
        vision = policy.vision(image_tensor(center_crop(image, policy.crop_size)))[0].numpy()
    cond = build_conditioning(Variant.FUSION_EMBED, vision, spec, policy.audio_model)
    expected, _ = reverse_chain(policy, torch.from_numpy(cond.vector)[None], torch.Generator().manual_seed(7))
    assert np.allclose(action, expected[0].numpy(), atol=1e-6)


def test_audio_model_is_frozen_and_not_saved(norm):
    detector = _detector()
    policy = DiffusionPolicy(Variant.FUSION_EMBED, norm, detector, STATS, cfg=SMALL)
    assert not any(p.requires_grad for p in detector.parameters())
    assert not any(name.startswith("audio") for name in policy.state_dict())
    trainable = {id(p) for p in policy.trainable_parameters()}
    assert not any(id(p) in trainable for p in detector.parameters())


def test_training_loss_is_finite(episodes, norm):
    config = RunConfig()
    policy = DiffusionPolicy(Variant.SOFT_SENSOR, norm, None, STATS, cfg=SMALL)
    batch = sample_batch(episodes, 4, np.random.default_rng(0), norm, config.mel, config.augment, False)
    audio = batch.button_state.reshape(-1, 1)
    loss = training_loss(policy, batch, audio, torch.Generator().manual_seed(0))
    assert loss.dim() == 0
    assert torch.isfinite(loss)


def test_reverse_chain_stays_in_box(norm):
    torch.manual_seed(0)
    policy = DiffusionPolicy(Variant.SOFT_SENSOR, norm, None, STATS, cfg=SMALL)
    sample, history = reverse_chain(policy, torch.zeros(5, 65), torch.Generator().manual_seed(0), record=True)
    assert sample.shape == (5, 3)
    assert len(history) == 10
    assert all(h.abs().max().item() <= 1.0 for h in history)


def test_sample_action_is_seeded(norm):
    policy = DiffusionPolicy(Variant.FUSION_LOGITS, norm, _detector(), STATS, cfg=SMALL)
    image = np.random.default_rng(0).integers(0, 256, (96, 96, 3), dtype=np.uint8)
    spec = np.zeros((298, 128), np.float32)
    a = sample_action(policy, image, spec, torch.Generator().manual_seed(3))
    b = sample_action(policy, image, spec, torch.Generator().manual_seed(3))
    assert a.shape == (3,)
    assert np.all(np.abs(a) <= 1.0)
    assert np.array_equal(a, b)
    assert np.all(np.abs(policy.denormalize_action(np.ones(3)) - norm.action_max) < 1e-6)


def test_policy_checkpoint_round_trip(tmp_path, norm):
    policy = DiffusionPolicy(Variant.FUSION_EMBED, norm, _detector(), STATS, cfg=SMALL)
    path = save_policy(tmp_path / "policy.pbc", policy, seed=0)
    loaded = load_policy(path)
    assert loaded.variant == Variant.FUSION_EMBED
    assert loaded.schedule.T == 10
    assert isinstance(loaded.audio_model, ClickDetector)
    image = np.zeros((96, 96, 3), np.uint8)
    spec = np.random.default_rng(1).normal(size=(298, 128)).astype(np.float32)
    a = sample_action(policy, image, spec, torch.Generator().manual_seed(0))
    b = sample_action(loaded, image, spec, torch.Generator().manual_seed(0))
    assert np.allclose(a, b, atol=1e-5)


@pytest.mark.slow
def test_soft_sensor_training_reduces_loss(episodes, norm):
    config = RunConfig(policy=PolicyTrainingConfig(lr=1e-3, warmup_steps=20, batch_size=16, hidden_dim=64))
    result = train_policy(episodes, norm, Variant.SOFT_SENSOR, _detector(), STATS, config=config, seed=0, steps=200)
    curve = result.loss_curve
    assert len(curve) == 200
    assert np.mean(curve[-20:]) < np.mean(curve[:5])


def test_training_needs_data(norm):
    with pytest.raises(ConfigurationError):
        train_policy([], norm, Variant.SOFT_SENSOR, None, STATS, steps=1)


class _TrueNoise(nn.Module):
    """Recovers the exact noise from the noisy action and the known clean one."""

    def __init__(self, schedule, clean):
        super().__init__()
        self.alpha_bar = torch.as_tensor(schedule.alpha_bar, dtype=torch.float32)
        self.clean = clean

    def forward(self, noisy, t, cond):
        ab = self.alpha_bar[t].unsqueeze(-1)
        return (noisy - ab.sqrt() * self.clean) / (1.0 - ab).sqrt()


class _ZeroNoise(nn.Module):
    def forward(self, noisy, t, cond):
        return torch.zeros_like(noisy)


class _GaussianPosteriorNoise(nn.Module):
    """Minimum-MSE noise prediction when every action coordinate is N(mean, std^2)."""

    def __init__(self, schedule, mean, std):
        super().__init__()
        self.alpha_bar = torch.as_tensor(schedule.alpha_bar, dtype=torch.float32)
        self.mean = mean
        self.std = std

    def forward(self, noisy, t, cond):
        ab = self.alpha_bar[t].unsqueeze(-1)
        return (1.0 - ab).sqrt() * (noisy - ab.sqrt() * self.mean) / (ab * self.std**2 + 1.0 - ab)


def _blank_batch(actions):
    size = len(actions)
    return Batch(
        images=np.zeros((size, 86, 86, 3), np.float32),
        button_state=np.zeros(size, np.float32),
        actions=np.asarray(actions, np.float32),
        indices=[(0, i) for i in range(size)],
    )


def test_loss_vanishes_for_exact_noise_prediction(norm):
    actions = np.random.default_rng(0).uniform(-1.0, 1.0, (64, 3)).astype(np.float32)
    schedule = make_schedule(SMALL.diffusion_steps)
    stub = _TrueNoise(schedule, torch.from_numpy(actions))
    policy = DiffusionPolicy(Variant.SOFT_SENSOR, norm, None, STATS, cfg=SMALL, denoiser=stub)
    loss = training_loss(policy, _blank_batch(actions), np.zeros((64, 1)), torch.Generator().manual_seed(1))
    assert loss.item() < 1e-8


def test_loss_of_zero_prediction_is_noise_variance(norm):
    policy = DiffusionPolicy(Variant.SOFT_SENSOR, norm, None, STATS, cfg=SMALL, denoiser=_ZeroNoise())
    batch = _blank_batch(np.full((1024, 3), 0.25))
    with torch.no_grad():
        loss = training_loss(policy, batch, np.zeros((1024, 1)), torch.Generator().manual_seed(2))
        fixed = training_loss(policy, batch, np.zeros((1024, 1)), noise=torch.full((1024, 3), 0.5))
    assert loss.item() == pytest.approx(1.0, abs=0.1)
    assert fixed.item() == pytest.approx(0.25)


def test_zero_prediction_samples_are_centred(norm):
    policy = DiffusionPolicy(Variant.SOFT_SENSOR, norm, None, STATS, cfg=SMALL, denoiser=_ZeroNoise())
    sample, _ = reverse_chain(policy, torch.zeros(10_000, 65), torch.Generator().manual_seed(3))
    assert sample.abs().max().item() <= 1.0
    assert np.all(np.abs(sample.mean(dim=0).numpy()) < 0.05)


def test_gaussian_actions_survive_forward_and_reverse(norm):
    mean, std = 0.3, 0.1
    cfg = PolicyTrainingConfig(hidden_dim=32)
    schedule = make_schedule(cfg.diffusion_steps)

    rng = np.random.default_rng(4)
    clean = rng.normal(mean, std, 20_000)
    noisy = q_sample(schedule, clean, 20, rng.standard_normal(20_000))
    ab = schedule.alpha_bar[20]
    assert noisy.mean() == pytest.approx(np.sqrt(ab) * mean, abs=0.02)
    assert noisy.var() == pytest.approx(ab * std**2 + 1.0 - ab, abs=0.03)

    stub = _GaussianPosteriorNoise(schedule, mean, std)
    policy = DiffusionPolicy(Variant.SOFT_SENSOR, norm, None, STATS, cfg=cfg, denoiser=stub)
    sample, _ = reverse_chain(policy, torch.zeros(4000, 65), torch.Generator().manual_seed(5))
    values = sample.numpy().ravel()
    assert values.mean() == pytest.approx(mean, abs=0.05)
    assert 0.05 < values.std() < 0.15


@pytest.mark.slow
def test_constant_demonstrations_are_reproduced():
    target = np.array([0.0, 0.0, 0.5])
    norm = NormStats(
        action_min=[-0.01] * 3, action_max=[0.01] * 3, eef_min=[-1.0] * 3, eef_max=[1.0] * 3, spec=STATS
    )
    raw = np.array([0.0, 0.0, 0.005], np.float32)
    episodes = []
    for seed in range(4):
        episode = make_episode(steps=20, seed=seed, constant_action=True)
        episodes.append(
            episode.model_copy(
                update={"image": np.zeros_like(episode.image), "action": np.tile(raw, (len(episode), 1))}
            )
        )
    config = RunConfig(
        policy=PolicyTrainingConfig(lr=1e-3, warmup_steps=100, batch_size=32, hidden_dim=128, log_every=500)
    )
    result = train_policy(episodes, norm, Variant.SOFT_SENSOR, None, STATS, config=config, seed=0, steps=3000)
    policy = result.policy

    with torch.no_grad():
        cond = policy.condition(image_tensor(np.zeros((86, 86, 3), np.uint8)), torch.zeros(1, 1))
    sample, _ = reverse_chain(policy, cond.repeat(512, 1), torch.Generator().manual_seed(6))
    deviation = sample.numpy() - target
    assert np.all(np.abs(deviation.mean(axis=0)) < 0.05)
    assert np.all(np.median(np.abs(deviation), axis=0) < 0.05)
    assert np.all(np.mean(np.abs(deviation) < 0.1, axis=0) >= 0.9)
