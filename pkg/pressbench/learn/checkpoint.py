"""Model checkpoints: JSON header (layer specs, shapes, offsets) + raw f32 parameters."""
import logging
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np
import torch
import torch.nn as nn

from pressbench.errors import DatasetError
from pressbench.utils.container import read_container, write_container

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"PBC1"


def module_arrays(modules: Dict[str, nn.Module]) -> Dict[str, np.ndarray]:
    """Flatten ``{prefix: module}`` into ``{prefix.param: float32 array}``."""
    arrays = {}
    for prefix, module in modules.items():
        for name, tensor in module.state_dict().items():
            arrays[f"{prefix}.{name}"] = tensor.detach().cpu().numpy().astype(np.float32)
    return arrays


def save_checkpoint(path: Union[str, Path], modules: Dict[str, nn.Module], meta: dict) -> Path:
    """Write modules' parameters with a metadata header.

    Args:
        path: Output file
        modules: Named modules; each parameter is stored as ``<prefix>.<param>``
        meta: JSON-compatible header fields (layer specs, variant, stats, ...)

    Returns:
        The written path
    """
    path = write_container(path, CHECKPOINT_MAGIC, meta, module_arrays(modules))
    logger.info(f"Saved checkpoint {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[dict, Dict[str, np.ndarray]]:
    """Read a checkpoint's header and parameter arrays."""
    return read_container(path, CHECKPOINT_MAGIC)


def load_into(module: nn.Module, arrays: Dict[str, np.ndarray], prefix: str) -> nn.Module:
    """Load ``<prefix>.*`` arrays into a module built from the stored spec."""
    state = {
        name[len(prefix) + 1 :]: torch.from_numpy(array.copy())
        for name, array in arrays.items()
        if name.startswith(prefix + ".")
    }
    try:
        module.load_state_dict(state, strict=True)
    except RuntimeError as e:
        logger.error(f"Error loading parameters for {prefix}: {e}")
        raise DatasetError(f"checkpoint does not match module {prefix}: {e}") from e
    return module
