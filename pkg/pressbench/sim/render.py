"""Synthetic top-down wrist camera."""
import numpy as np

from pressbench.sim.models import SimState

BACKGROUND = 0.08
PANEL = 0.3
PANEL_HALF_SIZE = 0.02
DISC_COLOR = np.array([0.55, 0.12, 0.12])
DISC_COLOR_PRESSED = np.array([0.95, 0.45, 0.40])


def project_button(state: SimState) -> tuple:
    """Image-plane centre (u, v) and disc radius in pixels of the button.

    The camera looks straight down from ``camera_offset`` above the fingertip;
    ``u`` grows with world +x of the button relative to the fingertip, ``v`` with -y.
    """
    cfg = state.config
    center = np.asarray(cfg.button_center)
    rel = center - state.eef_position
    depth = max(state.eef_position[2] - center[2] + cfg.camera_offset, 1e-3)
    scale = cfg.focal_px / depth
    c0 = (cfg.image_size - 1) / 2.0
    u = c0 + scale * rel[0]
    v = c0 - scale * rel[1]
    return u, v, scale * cfg.button_radius, scale


def render_image(state: SimState) -> np.ndarray:
    """Render the wrist view as an ``image_size x image_size x 3`` array in [0, 1]."""
    cfg = state.config
    u, v, radius, scale = project_button(state)
    rows, cols = np.mgrid[0 : cfg.image_size, 0 : cfg.image_size].astype(np.float64)

    panel_half = scale * PANEL_HALF_SIZE
    panel = np.clip(panel_half + 0.5 - np.maximum(np.abs(cols - u), np.abs(rows - v)), 0.0, 1.0)
    disc = np.clip(radius + 0.5 - np.hypot(cols - u, rows - v), 0.0, 1.0)

    image = np.full((cfg.image_size, cfg.image_size, 3), BACKGROUND)
    image += (PANEL - BACKGROUND) * panel[..., None]
    color = DISC_COLOR_PRESSED if state.pressed else DISC_COLOR
    image = image * (1.0 - disc[..., None]) + color * disc[..., None]

    image += cfg.image_noise_sigma * state.rng.standard_normal(image.shape)
    return np.clip(image, 0.0, 1.0).astype(np.float32)


def to_uint8(image: np.ndarray) -> np.ndarray:
    """Quantize a [0, 1] image to 8 bits, as stored in episodes."""
    return np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
