"""Automated demonstration collection."""
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from pressbench.config import RunConfig, config_hash, get_runtime_settings
from pressbench.data.expert import expert_episode
from pressbench.data.models import CollectionStats, Episode, EpisodeEntry, Manifest
from pressbench.data.normalization import compute_norm_stats
from pressbench.data.store import EpisodeStore
from pressbench.errors import ConfigurationError, DatasetError

logger = logging.getLogger(__name__)


def _attempt_cap(n: int) -> int:
    return 2 * n + 10


def collect(
    n: int,
    out_dir: Union[str, Path],
    base_seed: int,
    config: Optional[RunConfig] = None,
    threads: Optional[int] = None,
) -> Manifest:
    """Collect ``n`` successful expert episodes and write them with a manifest.

    Seeds ``base_seed, base_seed + 1, ...`` are tried in order; failed episodes
    are excluded and their seeds recorded. Episodes are simulated in parallel
    but accepted in seed order, so the dataset does not depend on ``threads``.

    Args:
        n: Number of successful episodes to keep
        out_dir: Dataset directory
        base_seed: First episode seed
        config: Run configuration (defaults when None)
        threads: Worker count (``PRESSBENCH_THREADS`` when None)

    Returns:
        The written Manifest
    """
    config = config or RunConfig()
    threads = threads or get_runtime_settings().threads
    store = EpisodeStore(out_dir)
    stats = CollectionStats()
    accepted: List[Episode] = []
    written: List[str] = []

    logger.info("=" * 60)
    logger.info(f"Collecting {n} demonstrations (base seed {base_seed}, {threads} threads)")
    logger.info("=" * 60)

    try:
        next_seed = base_seed
        with ThreadPoolExecutor(max_workers=threads) as pool:
            while len(accepted) < n:
                if stats.attempted >= _attempt_cap(n):
                    raise ConfigurationError(
                        f"expert succeeded on only {len(accepted)} of {stats.attempted} seeds"
                    )
                wave = list(range(next_seed, next_seed + min(n - len(accepted), 4 * threads)))
                next_seed = wave[-1] + 1
                for episode in pool.map(lambda s: expert_episode(config.sim, s, config.collection), wave):
                    if len(accepted) == n:
                        break
                    stats.attempted += 1
                    if not episode.success:
                        stats.excluded_seeds.append(episode.seed)
                        continue
                    name = store.episode_name(len(accepted))
                    store.save_episode(episode, name)
                    written.append(name)
                    accepted.append(episode)
                    if len(accepted) % 20 == 0:
                        logger.info(f"Collected {len(accepted)}/{n} episodes")

        stats.succeeded = len(accepted)
        if accepted:
            peaks = [float(e.peak_fz.max()) for e in accepted]
            stats.expert_peak_fz_median = float(np.median(peaks))
        manifest = Manifest(
            config_hash=config_hash(config),
            base_seed=base_seed,
            episodes=[
                EpisodeEntry(file=name, seed=e.seed, steps=len(e)) for name, e in zip(written, accepted)
            ],
            stats=stats,
            norm=compute_norm_stats(accepted, config.mel, config.collection.stats_window_stride)
            if accepted
            else None,
            sim_config=config.sim.model_dump(mode="json"),
            mel_config=config.mel.model_dump(mode="json"),
        )
        store.write_manifest(manifest)
    except Exception as e:
        logger.error(f"Collection failed, removing {len(written)} partial episode files: {e}")
        store.remove(written)
        store.manifest_path.unlink(missing_ok=True)
        if not isinstance(e, OSError) or isinstance(e, DatasetError):
            raise
        raise DatasetError(f"collection into {out_dir} failed: {e}") from e

    logger.info(
        f"✅ Collected {stats.succeeded} episodes, {len(stats.excluded_seeds)} excluded, "
        f"expert peak F_z median {stats.expert_peak_fz_median}"
    )
    return manifest
