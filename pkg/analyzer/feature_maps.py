"""
analyzer/feature_maps.py - dump convolutional feature maps as PGM images.
"""
import logging
import os
from typing import List, Sequence

import numpy as np

from analyzer.pgm import write_pgm
from checkpoint_store import Checkpoint
from desk_trainer import DeskNet

logger = logging.getLogger(__name__)


def normalize_map(fmap: np.ndarray) -> np.ndarray:
    """Min-max to 0..255; constant maps become all zeros."""
    m = fmap.astype(np.float64)
    lo, hi = m.min(), m.max()
    if hi == lo:
        return np.zeros(m.shape, dtype=np.uint8)
    return np.floor((m - lo) / (hi - lo) * 255.0 + 0.5).astype(np.uint8)


def feature_map_dump(model: Checkpoint, image: np.ndarray, layers: Sequence[str], out_dir: str) -> List[str]:
    net = DeskNet.from_checkpoint(model)
    maps = net.feature_maps(np.asarray(image)[None], list(layers))
    written = []
    for layer in layers:
        fmap = maps[layer][0]
        for channel in range(fmap.shape[0]):
            path = os.path.join(out_dir, f"{layer}_{channel}.pgm")
            write_pgm(path, normalize_map(fmap[channel]))
            written.append(path)
    logger.info("wrote %d feature maps to %s", len(written), out_dir)
    return written
