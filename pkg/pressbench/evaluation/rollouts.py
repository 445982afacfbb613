"""Seeded evaluation rollouts with the privileged channel locked."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict
from typing_extensions import Protocol

from pressbench.config import EvaluationConfig, SimConfig, get_runtime_settings, seconds_to_steps
from pressbench.data.expert import to_sim_action
from pressbench.dsp.streams import AudioRing
from pressbench.errors import PrivilegedLeakError
from pressbench.evaluation.metrics import peak_fz
from pressbench.policy.diffusion_policy import DiffusionPolicy, sample_action
from pressbench.sim import StepOutput, initial_output, new_sim, step

logger = logging.getLogger(__name__)


class Controller(Protocol):
    """Anything that turns observations into displacements (m)."""

    name: str
    uses_privileged_channel: bool

    def reset(self, seed: int, output: StepOutput) -> None: ...

    def act(self, output: StepOutput) -> np.ndarray: ...


class PolicyController:
    """Runs a diffusion policy on the image and the rolling audio stream only."""

    uses_privileged_channel = False

    def __init__(self, policy: DiffusionPolicy, sim: SimConfig, name: Optional[str] = None):
        self.policy = policy
        self.sim = sim
        self.name = name or policy.variant.display_name

    def reset(self, seed: int, output: StepOutput) -> None:
        rate = self.sim.audio_rate
        span = self.policy.mel.window_seconds + self.policy.soft_sensor_latency + self.sim.control_dt
        self.ring = AudioRing(rate, origin=-self.sim.control_dt, capacity=int(math.ceil(span * rate)))
        self.generator = torch.Generator().manual_seed(seed)

    def act(self, output: StepOutput) -> np.ndarray:
        self.ring.append(output.audio_chunk)
        spectrogram = self.policy.audio_spectrogram(self.ring, output.time)
        action = sample_action(self.policy, output.image, spectrogram, self.generator)
        return self.policy.denormalize_action(action)


class RandomController:
    """Uniform random displacements within the maximum step."""

    uses_privileged_channel = False
    name = "random"

    def __init__(self, sim: SimConfig):
        self.sim = sim

    def reset(self, seed: int, output: StepOutput) -> None:
        self.rng = np.random.default_rng(seed)

    def act(self, output: StepOutput) -> np.ndarray:
        return (self.rng.uniform(-1.0, 1.0, size=3) * self.sim.max_step).astype(np.float32)


class RolloutResult(BaseModel):
    """Outcome of one evaluation rollout. ``peak_fz`` is set only for successes."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    seed: int
    success: bool
    pressed: bool
    peak_fz: Optional[float] = None
    force_trace: np.ndarray
    duration: float
    start_height: float
    final_height: float

    def step_peaks(self, substeps: int) -> np.ndarray:
        """Per-step peak |F_z| of steps with contact."""
        if self.force_trace.size == 0:
            return np.zeros(0)
        per_step = np.abs(self.force_trace[:, 2]).reshape(-1, substeps).max(axis=1)
        return per_step[per_step > 0.0]


def run_rollout(
    controller: Controller, seed: int, sim: SimConfig, cfg: Optional[EvaluationConfig] = None
) -> RolloutResult:
    """One rollout of at most ``cfg.max_duration`` simulated seconds.

    Success means a press edge occurred and the fingertip ended no lower than
    ``retract_margin`` below its start height.
    """
    cfg = cfg or EvaluationConfig()
    state = new_sim(sim, seed, privileged_locked=not controller.uses_privileged_channel)
    output = initial_output(state)
    start_height = float(output.eef_position[2])
    controller.reset(seed, output)

    traces: List[np.ndarray] = []
    pressed = False
    for _ in range(seconds_to_steps(cfg.max_duration, sim.control_dt)):
        displacement = controller.act(output)
        if output.tainted:
            raise PrivilegedLeakError(f"{controller.name} read the privileged channel (seed {seed})")
        output = step(state, to_sim_action(displacement, sim))
        traces.append(output.force_trace)
        pressed = pressed or output.press_edge

    trace = np.concatenate(traces).astype(np.float32) if traces else np.zeros((0, 3), np.float32)
    final_height = float(output.eef_position[2])
    success = pressed and final_height >= start_height - cfg.retract_margin
    return RolloutResult(
        seed=seed,
        success=success,
        pressed=pressed,
        peak_fz=peak_fz(trace) if success else None,
        force_trace=trace,
        duration=output.time,
        start_height=start_height,
        final_height=final_height,
    )


def run_rollouts(
    make_controller: Callable[[], Controller],
    n: int,
    base_seed: int,
    sim: SimConfig,
    cfg: Optional[EvaluationConfig] = None,
    threads: Optional[int] = None,
) -> List[RolloutResult]:
    """``n`` independent rollouts with seeds ``base_seed + i``, sorted by seed.

    Args:
        make_controller: Builds a fresh controller per rollout
        n: Number of rollouts
        base_seed: Seed of rollout 0
        sim: Simulator configuration
        cfg: Time budget and retract margin
        threads: Parallel rollouts (``PRESSBENCH_THREADS`` when None)

    Returns:
        RolloutResults ordered by seed
    """
    cfg = cfg or EvaluationConfig()
    threads = threads or get_runtime_settings().threads
    seeds = [base_seed + i for i in range(n)]

    def one(seed: int) -> RolloutResult:
        return run_rollout(make_controller(), seed, sim, cfg)

    try:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, seeds))
    except PrivilegedLeakError as e:
        logger.error(f"❌ Privileged leak during evaluation: {e}")
        raise
    successes = sum(r.success for r in results)
    logger.info(f"{successes}/{n} rollouts succeeded")
    return sorted(results, key=lambda r: r.seed)
