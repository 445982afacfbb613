"""Position-controlled fingertip pressing a snap-action button.

The arm is modelled as a first-order servo driving a commanded point; the
fingertip itself settles quasi-statically where the arm spring balances the
button's force-displacement curve. The snap of the button makes that balance
two-valued over a band of commanded depths, and the fingertip stays on the
branch it was on until that branch disappears. This gives the click on the way
in and the release hysteresis on the way out.
"""
import logging
import math
from typing import Sequence

import numpy as np

from pressbench.config import SimConfig
from pressbench.errors import DomainError
from pressbench.sim.audio import synthesize_audio
from pressbench.sim.models import SimState, StepOutput, SubstepContact
from pressbench.sim.render import render_image

logger = logging.getLogger(__name__)


def new_sim(config: SimConfig, seed: int, privileged_locked: bool = False) -> SimState:
    """Create a simulator with the fingertip at a seeded start pose.

    Args:
        config: Simulator configuration
        seed: PRNG seed; identical (config, seed) gives bit-identical state
        privileged_locked: Lock the button-state channel of every output

    Returns:
        Fresh SimState
    """
    config.check_invariants()
    rng = np.random.default_rng(seed)
    start = rng.uniform(np.asarray(config.start_box_lo), np.asarray(config.start_box_hi))
    return SimState(
        config=config,
        eef_position=start.copy(),
        commanded_position=start.copy(),
        servo_target=start.copy(),
        rng=rng,
        privileged_locked=privileged_locked,
    )


def button_force(depression: float, config: SimConfig) -> float:
    """Axial force of the button at a given depression (N).

    Linear spring up to the click, constant post-click force up to full travel,
    then the end-stop wall. The drop at the click is the snap.
    """
    if not math.isfinite(depression) or depression < 0:
        raise DomainError(f"depression must be finite and >= 0 (got {depression})")
    if depression < config.click_depth:
        return config.pre_click_stiffness * depression
    if depression < config.full_travel:
        return config.post_click_force
    return config.post_click_force + config.wall_stiffness * (depression - config.full_travel)


def equilibrium_depression(servo_depth: float, previous: float, config: SimConfig) -> float:
    """Fingertip depression balancing the arm spring against the button.

    Args:
        servo_depth: Depth of the commanded point below the button top (m, > 0)
        previous: Fingertip depression before this substep, selects the branch
        config: Simulator configuration

    Returns:
        Depression of the fingertip (may exceed full_travel when the wall engages)
    """
    k = config.arm_stiffness
    click = config.click_depth
    full = config.full_travel

    lower = k * servo_depth / (k + config.pre_click_stiffness)
    lower_ok = lower < click

    upper = servo_depth - config.post_click_force / k
    if upper >= full:
        upper = (k * servo_depth - config.post_click_force + config.wall_stiffness * full) / (
            k + config.wall_stiffness
        )
    upper_ok = upper >= click

    if previous < click:
        if lower_ok:
            return lower
        return upper if upper_ok else click
    if upper_ok:
        return upper
    return lower if lower_ok else click


def _clip_workspace(position: np.ndarray, config: SimConfig) -> np.ndarray:
    return np.clip(position, config.workspace_lo, config.workspace_hi)


def _resolve_contact(state: SimState) -> tuple:
    """Place the fingertip for the current commanded point; returns (axial force, in contact, edge)."""
    cfg = state.config
    center = np.asarray(cfg.button_center)
    commanded = state.commanded_position
    lateral = math.hypot(commanded[0] - center[0], commanded[1] - center[1])
    servo_depth = center[2] - commanded[2]

    tip = commanded.copy()
    if lateral > cfg.button_radius or servo_depth <= 0.0:
        depression = 0.0
    else:
        depression = equilibrium_depression(servo_depth, state.tip_depression, cfg)
        tip[2] = center[2] - depression
    in_contact = depression > 0.0
    axial = button_force(depression, cfg) if in_contact else 0.0

    state.eef_position = tip
    state.tip_depression = depression
    state.button_depression = min(depression, cfg.full_travel)

    edge = False
    if not state.pressed and state.button_depression >= cfg.click_depth:
        state.pressed = True
        edge = True
    elif state.pressed and state.button_depression < cfg.release_depth:
        state.pressed = False
    return axial, in_contact, edge


def _make_output(state: SimState, audio: np.ndarray, trace: np.ndarray, press_edge: bool) -> StepOutput:
    return StepOutput(
        image=render_image(state),
        audio_chunk=audio,
        force=trace[-1].copy() if len(trace) else np.zeros(3),
        eef_position=state.eef_position.copy(),
        press_edge=press_edge,
        force_trace=trace,
        time=state.time,
        _button_state=int(state.pressed),
        privileged_locked=state.privileged_locked,
    )


def initial_output(state: SimState) -> StepOutput:
    """Observation at t = 0: the starting frame and one chunk of idle audio."""
    cfg = state.config
    idle = [SubstepContact()] * cfg.substeps
    # idle audio belongs to the interval (-control_dt, 0]
    state.step_index -= 1
    audio = synthesize_audio(state, idle)
    state.step_index += 1
    trace = np.zeros((cfg.substeps, 3))
    return _make_output(state, audio, trace, False)


def step(state: SimState, action: Sequence[float]) -> StepOutput:
    """Advance one control step.

    Args:
        state: Simulator state, mutated in place
        action: Relative displacement in [-1, 1]^3, scaled by the maximum step

    Returns:
        StepOutput at the end of the step
    """
    cfg = state.config
    action = np.clip(np.asarray(action, dtype=np.float64).reshape(3), -1.0, 1.0)
    state.servo_target = _clip_workspace(state.eef_position + action * cfg.max_step, cfg)

    dt = cfg.physics_dt
    trace = np.zeros((cfg.substeps, 3))
    contacts = []
    press_edge = False
    for k in range(cfg.substeps):
        velocity = cfg.servo_gain * (state.servo_target - state.commanded_position)
        speed = float(np.linalg.norm(velocity))
        if speed > cfg.max_eef_speed:
            velocity *= cfg.max_eef_speed / speed
        previous_tip = state.eef_position.copy()
        state.commanded_position = _clip_workspace(state.commanded_position + velocity * dt, cfg)

        axial, in_contact, edge = _resolve_contact(state)
        slip = (state.eef_position[:2] - previous_tip[:2]) / dt
        tangential_speed = float(np.hypot(slip[0], slip[1]))

        force = np.array([0.0, 0.0, axial])
        if in_contact and tangential_speed > 1e-9:
            force[:2] = -cfg.friction_coefficient * axial * slip / tangential_speed
        trace[k] = force
        contacts.append(SubstepContact(in_contact, tangential_speed, edge))
        press_edge = press_edge or edge

    audio = synthesize_audio(state, contacts)
    state.step_index += 1
    if press_edge:
        logger.debug(f"Press edge at t={state.time:.1f}s")
    return _make_output(state, audio, trace, press_edge)
