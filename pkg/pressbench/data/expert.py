"""Scripted demonstrator driven by the button's instrumentation."""
import logging
from enum import Enum
from typing import List, Optional

import numpy as np

from pressbench.config import CollectionConfig, SimConfig, config_hash, seconds_to_steps
from pressbench.data.models import Episode, TimeStep
from pressbench.sim import SimState, StepOutput, initial_output, new_sim, step, to_uint8

logger = logging.getLogger(__name__)

# stream id separating the expert's randomness from the simulator's
EXPERT_STREAM = 7


class Phase(str, Enum):
    VIA = "via"
    HOVER = "hover"
    DESCEND = "descend"
    RETRACT = "retract"
    DONE = "done"


def to_sim_action(displacement: np.ndarray, config: SimConfig) -> np.ndarray:
    """Recorded float32 displacement (m) to the simulator's unit action."""
    return np.asarray(displacement, dtype=np.float32).astype(np.float64) / config.max_step


class ScriptedExpert:
    """Three-phase pressing routine: approach via a random point, descend gently, retract.

    The descent ends when the instrumented button state flips, so the expert
    reads the privileged channel and declares it.
    """

    uses_privileged_channel = True
    name = "expert"

    def __init__(self, sim: SimConfig, collection: Optional[CollectionConfig] = None):
        self.sim = sim
        self.cfg = collection or CollectionConfig()
        self.center = np.asarray(sim.button_center, dtype=np.float64)
        self.phase = Phase.VIA

    def reset(self, seed: int, output: StepOutput) -> None:
        self.rng = np.random.default_rng([seed, EXPERT_STREAM])
        self.start = np.asarray(output.eef_position, dtype=np.float64).copy()
        lateral = self.rng.uniform(-self.cfg.via_lateral_range, self.cfg.via_lateral_range, size=2)
        height = self.rng.uniform(*self.cfg.via_height_range)
        self.via = self.center + np.array([lateral[0], lateral[1], height])
        self.hover = self.center + np.array([0.0, 0.0, self.cfg.hover_height])
        self.phase = Phase.VIA
        self.pressed = False

    @property
    def done(self) -> bool:
        return self.phase == Phase.DONE

    def _toward(self, position: np.ndarray, target: np.ndarray, limit: float) -> np.ndarray:
        delta = target - position
        distance = float(np.linalg.norm(delta))
        if distance > limit:
            delta *= limit / distance
        noise = self.rng.standard_normal(3) * self.cfg.direction_noise * float(np.linalg.norm(delta))
        return delta + noise

    def _advance(self, output: StepOutput) -> None:
        position = output.eef_position
        tol = self.cfg.hover_tolerance
        if self.phase == Phase.VIA and np.linalg.norm(position - self.via) <= 2 * tol:
            self.phase = Phase.HOVER
        if self.phase == Phase.HOVER:
            lateral = np.hypot(*(position[:2] - self.hover[:2]))
            if lateral <= tol and abs(position[2] - self.hover[2]) <= tol:
                self.phase = Phase.DESCEND
        if self.phase == Phase.DESCEND and output.button_state:
            self.pressed = True
            self.phase = Phase.RETRACT
        if self.phase == Phase.RETRACT and position[2] >= self.start[2]:
            self.phase = Phase.DONE

    def act(self, output: StepOutput) -> np.ndarray:
        """Displacement (m, float32) to command after observing ``output``."""
        self._advance(output)
        position = np.asarray(output.eef_position, dtype=np.float64)
        max_step = self.sim.max_step
        if self.phase == Phase.VIA:
            delta = self._toward(position, self.via, max_step)
        elif self.phase == Phase.HOVER:
            delta = self._toward(position, self.hover, max_step)
        elif self.phase == Phase.DESCEND:
            delta = np.zeros(3)
            delta[:2] = np.clip(self.center[:2] - position[:2], -max_step, max_step)
            delta[2] = -self.cfg.descent_fraction * max_step
        elif self.phase == Phase.RETRACT:
            # aim slightly above the start height; the servo only closes part of each step
            overshoot = self.start[2] + self.cfg.hover_tolerance - position[2]
            delta = np.array([0.0, 0.0, min(self.cfg.retract_fraction * max_step, overshoot)])
        else:
            delta = np.zeros(3)
        return np.clip(delta, -max_step, max_step).astype(np.float32)


def _record(output: StepOutput, action: np.ndarray) -> TimeStep:
    return TimeStep(
        image=to_uint8(output.image),
        audio_chunk=output.audio_chunk,
        button_state=output.button_state,
        eef_position=output.eef_position.astype(np.float32),
        action=action,
        force=output.force.astype(np.float32),
        press_edge=output.press_edge,
        t=output.time,
        peak_fz=output.peak_fz,
    )


def scripted_expert(sim: SimState, seed: int, collection: Optional[CollectionConfig] = None) -> Episode:
    """Run the scripted expert on a freshly initialized simulator.

    Args:
        sim: Simulator created with ``new_sim(config, seed)``
        seed: The simulator's seed; also seeds the via point and direction noise
        collection: Expert parameters and time budget

    Returns:
        Episode; ``success`` is False when no press happened within the budget
    """
    collection = collection or CollectionConfig()
    expert = ScriptedExpert(sim.config, collection)
    output = initial_output(sim)
    expert.reset(seed, output)
    budget = seconds_to_steps(collection.max_duration, sim.config.control_dt)

    steps: List[TimeStep] = []
    while True:
        action = expert.act(output)
        steps.append(_record(output, action))
        if expert.done or len(steps) > budget:
            break
        output = step(sim, to_sim_action(action, sim.config))

    success = expert.done and expert.pressed
    if not success:
        logger.warning(f"Expert failed on seed {seed} (phase {expert.phase.value} after {len(steps)} steps)")
    return Episode.from_steps(
        steps,
        seed=seed,
        success=success,
        metadata={"config_hash": config_hash(sim.config), "expert": "scripted"},
    )


def expert_episode(config: SimConfig, seed: int, collection: Optional[CollectionConfig] = None) -> Episode:
    """``scripted_expert`` on a new simulator for ``seed``."""
    return scripted_expert(new_sim(config, seed), seed, collection)


def replay_episode(episode: Episode, config: SimConfig) -> List[StepOutput]:
    """Re-drive a simulator with an episode's recorded actions.

    Returns one StepOutput per recorded time step; the final recorded action is
    not executed because the episode ended on its observation.
    """
    sim = new_sim(config, episode.seed)
    outputs = [initial_output(sim)]
    for action in episode.action[:-1]:
        outputs.append(step(sim, to_sim_action(action, config)))
    return outputs
