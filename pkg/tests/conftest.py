"""Shared fixtures: default configs, synthetic episodes, and a tiny collected dataset."""
import numpy as np
import pytest

from pressbench.config import CollectionConfig, MelConfig, RunConfig, SimConfig
from pressbench.data import EpisodeStore, collect
from pressbench.data.models import Episode

CHUNK = 1600


def make_episode(steps: int = 40, seed: int = 0, press_at=None, constant_action: bool = False) -> Episode:
    """Random episode with the layout of a collected one."""
    rng = np.random.default_rng(seed)
    press_edge = np.zeros(steps, np.uint8)
    button_state = np.zeros(steps, np.uint8)
    if press_at is not None:
        press_edge[press_at] = 1
        button_state[press_at:] = 1
    action = np.zeros((steps, 3), np.float32) if constant_action else rng.uniform(-0.01, 0.01, (steps, 3))
    return Episode(
        seed=seed,
        success=True,
        image=rng.integers(0, 256, (steps, 96, 96, 3), dtype=np.uint8),
        audio=rng.normal(0.0, 0.01, steps * CHUNK).astype(np.float32),
        button_state=button_state,
        eef_position=rng.uniform(-0.05, 0.1, (steps, 3)).astype(np.float32),
        action=np.asarray(action, np.float32),
        force=np.zeros((steps, 3), np.float32),
        press_edge=press_edge,
        t=(np.arange(steps) * 0.1).astype(np.float32),
        peak_fz=np.zeros(steps, np.float32),
    )


@pytest.fixture
def sim_config() -> SimConfig:
    return SimConfig()


@pytest.fixture
def mel_config() -> MelConfig:
    return MelConfig()


@pytest.fixture
def small_run_config() -> RunConfig:
    """Defaults with a three-episode collection budget."""
    return RunConfig(collection=CollectionConfig(episodes=3))


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Three expert demonstrations collected once per session: (root, manifest, episodes)."""
    root = tmp_path_factory.mktemp("dataset")
    config = RunConfig(collection=CollectionConfig(episodes=3))
    manifest = collect(3, root, base_seed=0, config=config, threads=1)
    return root, manifest, EpisodeStore(root).load_all()
