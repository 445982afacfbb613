"""Demonstrations: collection, storage, normalization and batching."""
from pressbench.data.augment import augment_image, center_crop
from pressbench.data.batching import Batch, sample_batch, sample_indices
from pressbench.data.collector import collect
from pressbench.data.expert import ScriptedExpert, expert_episode, replay_episode, scripted_expert, to_sim_action
from pressbench.data.models import CollectionStats, Episode, Manifest, NormStats, TimeStep
from pressbench.data.normalization import compute_norm_stats, denormalize, normalize
from pressbench.data.store import EpisodeStore
from pressbench.data.windows import episode_window, event_in_window, window_spectrogram

__all__ = [
    "Batch",
    "CollectionStats",
    "Episode",
    "EpisodeStore",
    "Manifest",
    "NormStats",
    "ScriptedExpert",
    "TimeStep",
    "augment_image",
    "center_crop",
    "collect",
    "compute_norm_stats",
    "denormalize",
    "episode_window",
    "event_in_window",
    "expert_episode",
    "normalize",
    "replay_episode",
    "sample_batch",
    "sample_indices",
    "scripted_expert",
    "to_sim_action",
    "window_spectrogram",
]
