"""State and output records of the button-pressing simulator."""
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from pressbench.config import SimConfig
from pressbench.errors import PrivilegedLeakError


@dataclass
class SimState:
    """Mutable simulator state. One owner; never stepped concurrently."""

    config: SimConfig
    eef_position: np.ndarray
    commanded_position: np.ndarray
    servo_target: np.ndarray
    rng: np.random.Generator
    button_depression: float = 0.0
    tip_depression: float = 0.0
    pressed: bool = False
    step_index: int = 0
    # onset sample indices of click transients still ringing
    audio_phase: Tuple[int, ...] = ()
    privileged_locked: bool = False

    @property
    def time(self) -> float:
        return self.step_index * self.config.control_dt

    @property
    def sample_index(self) -> int:
        return self.step_index * self.config.samples_per_step

    def snapshot(self) -> dict:
        """Plain-data view used for determinism checks."""
        return {
            "eef_position": self.eef_position.tolist(),
            "commanded_position": self.commanded_position.tolist(),
            "servo_target": self.servo_target.tolist(),
            "button_depression": self.button_depression,
            "tip_depression": self.tip_depression,
            "pressed": self.pressed,
            "step_index": self.step_index,
            "audio_phase": list(self.audio_phase),
            "rng": self.rng.bit_generator.state,
        }


@dataclass(frozen=True)
class SubstepContact:
    """Contact summary of one physics substep, consumed by the audio synthesizer."""

    in_contact: bool = False
    tangential_speed: float = 0.0
    press_edge: bool = False


@dataclass
class StepOutput:
    """Everything the cell emits at the end of one control step.

    ``button_state`` is the privileged instrumentation channel. Outputs produced
    under a privileged lock raise on access and remember that they were read.
    """

    image: np.ndarray
    audio_chunk: np.ndarray
    force: np.ndarray
    eef_position: np.ndarray
    press_edge: bool
    force_trace: np.ndarray
    time: float
    _button_state: int = field(repr=False, default=0)
    privileged_locked: bool = False
    tainted: bool = False

    @property
    def button_state(self) -> int:
        if self.privileged_locked:
            self.tainted = True
            raise PrivilegedLeakError(
                f"privileged button_state read at t={self.time:.2f}s on an inference path"
            )
        return self._button_state

    @property
    def peak_fz(self) -> float:
        """Largest |F_z| over the substeps of this step (N)."""
        if len(self.force_trace) == 0:
            return 0.0
        return float(np.max(np.abs(self.force_trace[:, 2])))
