"""On-disk dataset: one container file per episode plus ``manifest.json``."""
import json
import logging
import os
from pathlib import Path
from typing import Iterable, List, Union

import numpy as np
from pydantic import ValidationError

from pressbench.config import SCHEMA_VERSION
from pressbench.data.models import EPISODE_ARRAYS, Episode, Manifest
from pressbench.errors import ConfigurationError, DatasetError
from pressbench.utils.container import read_container, write_container

logger = logging.getLogger(__name__)

EPISODE_MAGIC = b"PBE1"
MANIFEST_NAME = "manifest.json"
EPISODE_DIR = "episodes"


class EpisodeStore:
    """Reads and writes the episodes and manifest of one dataset directory."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    def episode_name(self, index: int) -> str:
        return f"{EPISODE_DIR}/episode_{index:05d}.pbe"

    def save_episode(self, episode: Episode, name: str) -> Path:
        """Write one episode container."""
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        meta = {
            "schema_version": SCHEMA_VERSION,
            "seed": episode.seed,
            "success": episode.success,
            "metadata": episode.metadata,
        }
        arrays = {}
        for field, kind in EPISODE_ARRAYS.items():
            dtype = np.uint8 if kind == "u8" else np.float32
            arrays[field] = np.asarray(getattr(episode, field), dtype=dtype)
        return write_container(path, EPISODE_MAGIC, meta, arrays)

    def load_episode(self, name: str) -> Episode:
        """Read one episode container."""
        path = self.root / name
        meta, arrays = read_container(path, EPISODE_MAGIC)
        missing = set(EPISODE_ARRAYS) - set(arrays)
        if missing:
            raise DatasetError(f"{path} lacks arrays {sorted(missing)}")
        try:
            return Episode(seed=meta["seed"], success=meta["success"], metadata=meta.get("metadata", {}), **arrays)
        except (KeyError, ValueError, ConfigurationError) as e:
            logger.error(f"Error loading episode {path}: {e}")
            raise DatasetError(f"malformed episode {path}: {e}") from e

    def write_manifest(self, manifest: Manifest) -> Path:
        """Atomically write ``manifest.json``."""
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = self.manifest_path.with_suffix(".json.tmp")
        try:
            tmp.write_text(json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True) + "\n")
            os.replace(tmp, self.manifest_path)
        except OSError as e:
            logger.error(f"Error writing manifest: {e}")
            tmp.unlink(missing_ok=True)
            raise DatasetError(f"could not write {self.manifest_path}: {e}") from e
        return self.manifest_path

    def read_manifest(self) -> Manifest:
        try:
            data = json.loads(self.manifest_path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"Error reading manifest: {e}")
            raise DatasetError(f"could not read {self.manifest_path}: {e}") from e
        if data.get("schema_version") != SCHEMA_VERSION:
            raise DatasetError(
                f"manifest schema version {data.get('schema_version')} is not {SCHEMA_VERSION}"
            )
        try:
            return Manifest.model_validate(data)
        except ValidationError as e:
            raise DatasetError(f"malformed manifest {self.manifest_path}: {e}") from e

    def load_all(self) -> List[Episode]:
        """Every episode listed in the manifest, in manifest order."""
        manifest = self.read_manifest()
        episodes = [self.load_episode(entry.file) for entry in manifest.episodes]
        logger.info(f"Loaded {len(episodes)} episodes from {self.root}")
        return episodes

    def remove(self, names: Iterable[str]) -> None:
        for name in names:
            (self.root / name).unlink(missing_ok=True)
