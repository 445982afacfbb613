"""Simulated instrumented button cell."""
from pressbench.sim.audio import synthesize_audio
from pressbench.sim.models import SimState, StepOutput, SubstepContact
from pressbench.sim.render import render_image, to_uint8
from pressbench.sim.simulator import button_force, initial_output, new_sim, step

__all__ = [
    "SimState",
    "StepOutput",
    "SubstepContact",
    "button_force",
    "initial_output",
    "new_sim",
    "render_image",
    "step",
    "synthesize_audio",
    "to_uint8",
]
