"""Configuration management for PressBench."""
import hashlib
import json
import math
import os
from enum import Enum
from pathlib import Path
from typing import Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from pressbench.errors import ConfigurationError

# Load environment variables
load_dotenv()

Vec3 = Tuple[float, float, float]

SCHEMA_VERSION = 1


class Variant(str, Enum):
    """Audio integration strategy of a policy."""

    GENERIC_EMBED = "generic"
    FUSION_LOGITS = "fusion-logits"
    FUSION_EMBED = "fusion-embed"
    SOFT_SENSOR = "soft-sensor"

    @property
    def display_name(self) -> str:
        return {
            "generic": "GenericEmbed",
            "fusion-logits": "FusionLogits",
            "fusion-embed": "FusionEmbed",
            "soft-sensor": "SoftSensor",
        }[self.value]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _is_integer_ratio(value: float, tol: float = 1e-9) -> bool:
    return abs(value - round(value)) < tol


class SimConfig(_Section):
    """Simulated button-pressing cell. Lengths in m, forces in N, times in s."""

    control_dt: float = 0.1
    physics_dt: float = 0.001
    audio_rate: int = 16000
    button_center: Vec3 = (0.0, 0.0, 0.0)
    click_depth: float = 0.0015
    full_travel: float = 0.0025
    release_depth: float = 0.0010
    pre_click_stiffness: float = 2000.0
    post_click_force: float = 0.8
    wall_stiffness: float = 50000.0
    button_radius: float = 0.006
    max_eef_speed: float = 0.1
    servo_gain: float = 20.0
    start_box_lo: Vec3 = (-0.06, -0.06, 0.08)
    start_box_hi: Vec3 = (0.06, 0.06, 0.14)
    workspace_lo: Vec3 = (-0.12, -0.12, -0.01)
    workspace_hi: Vec3 = (0.12, 0.12, 0.2)

    # Contact
    arm_stiffness: float = 2500.0
    friction_coefficient: float = 0.3

    # Audio synthesis
    audio_noise_sigma: float = 0.002
    scrape_gain: float = 0.5
    click_amplitude: float = 0.5
    click_frequency: float = 3000.0
    click_decay: float = 0.005

    # Wrist camera
    image_size: int = 96
    image_noise_sigma: float = 0.01
    focal_px: float = 70.0
    camera_offset: float = 0.05

    @model_validator(mode="after")
    def _validate(self) -> "SimConfig":
        self.check_invariants()
        return self

    def check_invariants(self) -> None:
        """Raise ConfigurationError naming the first violated invariant."""
        if not self.release_depth < self.click_depth < self.full_travel:
            raise ConfigurationError("release_depth < click_depth < full_travel violated")
        positive = {
            "control_dt": self.control_dt,
            "physics_dt": self.physics_dt,
            "audio_rate": self.audio_rate,
            "pre_click_stiffness": self.pre_click_stiffness,
            "post_click_force": self.post_click_force,
            "wall_stiffness": self.wall_stiffness,
            "arm_stiffness": self.arm_stiffness,
            "button_radius": self.button_radius,
            "max_eef_speed": self.max_eef_speed,
            "servo_gain": self.servo_gain,
            "release_depth": self.release_depth,
            "image_size": self.image_size,
            "focal_px": self.focal_px,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ConfigurationError(f"{name} must be strictly positive (got {value})")
        if not _is_integer_ratio(self.control_dt / self.physics_dt):
            raise ConfigurationError("control_dt must be an integer multiple of physics_dt")
        if not _is_integer_ratio(self.audio_rate * self.control_dt):
            raise ConfigurationError("audio_rate x control_dt must be an integer")
        if not _is_integer_ratio(self.audio_rate * self.physics_dt):
            raise ConfigurationError("audio_rate x physics_dt must be an integer")
        for axis in range(3):
            if self.start_box_lo[axis] > self.start_box_hi[axis]:
                raise ConfigurationError(f"start_box lo > hi on axis {axis}")
            if self.workspace_lo[axis] >= self.workspace_hi[axis]:
                raise ConfigurationError(f"workspace lo >= hi on axis {axis}")
            if not (
                self.workspace_lo[axis] <= self.start_box_lo[axis]
                and self.start_box_hi[axis] <= self.workspace_hi[axis]
            ):
                raise ConfigurationError(f"start_box outside workspace on axis {axis}")

    @property
    def substeps(self) -> int:
        return int(round(self.control_dt / self.physics_dt))

    @property
    def samples_per_step(self) -> int:
        return int(round(self.audio_rate * self.control_dt))

    @property
    def samples_per_substep(self) -> int:
        return int(round(self.audio_rate * self.physics_dt))

    @property
    def max_step(self) -> float:
        """Largest displacement commanded by a unit action (m)."""
        return self.max_eef_speed * self.control_dt


class MelConfig(_Section):
    """Log-Mel front end."""

    sample_rate: int = 16000
    window_length: int = 400
    hop_length: int = 160
    fft_size: int = 512
    n_mels: int = 128
    f_min: float = 0.0
    f_max: float = 8000.0
    log_floor: float = 1e-10
    window_seconds: float = 3.0

    @model_validator(mode="after")
    def _validate(self) -> "MelConfig":
        if self.window_length > self.fft_size:
            raise ConfigurationError("window_length <= fft_size violated")
        if self.hop_length > self.window_length:
            raise ConfigurationError("hop_length <= window_length violated")
        if self.f_max > self.sample_rate / 2:
            raise ConfigurationError("f_max <= sample_rate / 2 violated")
        if self.f_min < 0 or self.f_min >= self.f_max:
            raise ConfigurationError("0 <= f_min < f_max violated")
        if self.log_floor <= 0:
            raise ConfigurationError("log_floor must be positive")
        return self

    @property
    def window_samples(self) -> int:
        return int(round(self.window_seconds * self.sample_rate))

    @property
    def n_frames(self) -> int:
        return 1 + (self.window_samples - self.window_length) // self.hop_length

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1


class AugmentConfig(_Section):
    """Train-time image augmentation."""

    crop_size: int = 86
    brightness: float = 0.2
    contrast: float = 0.2
    saturation: float = 0.2
    hue: float = 0.05
    sharpness: float = 0.2

    @model_validator(mode="after")
    def _validate(self) -> "AugmentConfig":
        if self.crop_size <= 0:
            raise ConfigurationError("crop_size must be positive")
        for name in ("brightness", "contrast", "saturation", "sharpness"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ConfigurationError(f"{name} jitter must lie in [0, 1)")
        if not 0.0 <= self.hue <= 0.5:
            raise ConfigurationError("hue jitter must lie in [0, 0.5]")
        return self


class CollectionConfig(_Section):
    """Scripted expert and demonstration collection."""

    episodes: int = 200
    max_duration: float = 15.0
    hover_height: float = 0.01
    hover_tolerance: float = 0.001
    via_height_range: Tuple[float, float] = (0.03, 0.06)
    via_lateral_range: float = 0.02
    descent_fraction: float = 0.2
    retract_fraction: float = 0.6
    direction_noise: float = 0.1
    stats_window_stride: int = 5


class DetectorTrainingConfig(_Section):
    """Audio encoder pretraining and click-detector fine-tuning."""

    pretrain_epochs: int = 8
    pretrain_lr: float = 5e-4
    pretrain_per_class: int = 200
    finetune_epochs: int = 10
    finetune_lr: float = 1e-5
    head_lr_multiplier: float = 100.0
    weight_decay: float = 1e-6
    warmup_steps: int = 500
    batch_size: int = 32
    window_stride: int = 2
    val_fraction: float = 0.25
    threshold: float = 0.5


class PolicyTrainingConfig(_Section):
    """Diffusion policy training."""

    variant: Variant = Variant.FUSION_EMBED
    steps: int = 6000
    batch_size: int = 64
    lr: float = 1e-4
    weight_decay: float = 1e-6
    warmup_steps: int = 500
    diffusion_steps: int = 50
    hidden_dim: int = 256
    time_embed_dim: int = 32
    soft_sensor_latency: float = 0.05
    log_every: int = 200

    @model_validator(mode="after")
    def _validate(self) -> "PolicyTrainingConfig":
        # the sinusoidal embedding splits its width into equal sin and cos halves
        if self.time_embed_dim < 4 or self.time_embed_dim % 2:
            raise ConfigurationError(f"time_embed_dim must be even and >= 4 (got {self.time_embed_dim})")
        for name in ("steps", "batch_size", "diffusion_steps", "hidden_dim", "log_every"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive (got {getattr(self, name)})")
        if self.soft_sensor_latency < 0:
            raise ConfigurationError("soft_sensor_latency must be >= 0")
        return self


class EvaluationConfig(_Section):
    """Rollout harness and report."""

    rollouts: int = 40
    base_seed: int = 100000
    max_duration: float = 10.0
    retract_margin: float = 0.01
    w1_mode: str = Field(default="peak", pattern="^(peak|trace)$")
    histogram_bin: float = 0.5
    credible_level: float = 0.95


class RunConfig(_Section):
    """Merged configuration of a full experiment."""

    seed: int = 0
    sim: SimConfig = Field(default_factory=SimConfig)
    mel: MelConfig = Field(default_factory=MelConfig)
    augment: AugmentConfig = Field(default_factory=AugmentConfig)
    collection: CollectionConfig = Field(default_factory=CollectionConfig)
    detector: DetectorTrainingConfig = Field(default_factory=DetectorTrainingConfig)
    policy: PolicyTrainingConfig = Field(default_factory=PolicyTrainingConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)


class RuntimeSettings(BaseModel):
    """Process-level settings from the environment; not part of the config hash."""

    threads: int = Field(default_factory=lambda: int(os.getenv("PRESSBENCH_THREADS", "1")), ge=1)
    log_level: str = Field(default_factory=lambda: os.getenv("PRESSBENCH_LOG_LEVEL", "INFO"))


def canonical_json(model: BaseModel) -> str:
    """Deterministic JSON text of a model (sorted keys)."""
    return json.dumps(model.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def config_hash(model: BaseModel) -> str:
    """SHA-256 content digest of the semantic fields of a configuration."""
    return hashlib.sha256(canonical_json(model).encode("utf-8")).hexdigest()


def load_run_config(path: Union[str, Path, None] = None, **overrides) -> RunConfig:
    """Load a RunConfig from JSON, apply dotted-key overrides, and validate.

    Args:
        path: JSON file produced by ``default-config`` (or None for defaults)
        overrides: ``section__field=value`` pairs; None values are ignored

    Returns:
        Validated RunConfig
    """
    data: dict = {}
    if path is not None:
        with open(path, "r") as f:
            data = json.load(f)
    for key, value in overrides.items():
        if value is None:
            continue
        section, _, name = key.partition("__")
        if name:
            data.setdefault(section, {})[name] = value
        else:
            data[section] = value
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(str(e)) from e


def get_config() -> RunConfig:
    """Get the default run configuration."""
    return RunConfig()


def get_runtime_settings() -> RuntimeSettings:
    """Get process-level runtime settings."""
    return RuntimeSettings()


def seconds_to_steps(seconds: float, dt: float) -> int:
    return int(math.floor(seconds / dt + 1e-9))
