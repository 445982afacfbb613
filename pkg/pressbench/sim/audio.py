"""Fingertip microphone model: noise floor, contact scrape, and snap click."""
from typing import Sequence

import numpy as np

from pressbench.sim.models import SimState, SubstepContact

CLICK_DECAY_CONSTANTS = 10


def click_transient(tau: np.ndarray, amplitude: float, frequency: float, decay: float) -> np.ndarray:
    """Damped sinusoid a(tau) = A exp(-tau/decay) sin(2 pi f tau); zero for tau < 0."""
    tau = np.asarray(tau, dtype=np.float64)
    out = amplitude * np.exp(-np.maximum(tau, 0.0) / decay) * np.sin(2.0 * np.pi * frequency * tau)
    return np.where(tau >= 0.0, out, 0.0)


def synthesize_audio(state: SimState, contacts: Sequence[SubstepContact]) -> np.ndarray:
    """Synthesize the microphone signal over one control step.

    Args:
        state: Simulator state at the start of the step (its rng is consumed and
            its click oscillator state advanced)
        contacts: One SubstepContact per physics substep

    Returns:
        float32 samples in [-1, 1], ``len(contacts) * samples_per_substep`` long
    """
    cfg = state.config
    per_substep = cfg.samples_per_substep
    n = len(contacts) * per_substep
    start = state.sample_index

    samples = cfg.audio_noise_sigma * state.rng.standard_normal(n)

    speeds = np.repeat(
        [c.tangential_speed if c.in_contact else 0.0 for c in contacts], per_substep
    )
    samples += cfg.scrape_gain * speeds * state.rng.standard_normal(n)

    onsets = list(state.audio_phase)
    for k, contact in enumerate(contacts):
        if contact.press_edge:
            onsets.append(start + k * per_substep)

    ring_samples = int(CLICK_DECAY_CONSTANTS * cfg.click_decay * cfg.audio_rate)
    sample_idx = start + np.arange(n)
    for onset in onsets:
        tau = (sample_idx - onset) / cfg.audio_rate
        samples += click_transient(tau, cfg.click_amplitude, cfg.click_frequency, cfg.click_decay)

    state.audio_phase = tuple(o for o in onsets if start + n - o < ring_samples)
    return np.clip(samples, -1.0, 1.0).astype(np.float32)
