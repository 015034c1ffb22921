"""Keyed counter-based random streams"""
from enum import IntEnum
from typing import Sequence, Tuple

import numpy as np


class Channel(IntEnum):
    DRIVER = 0
    RESAMPLE = 1
    BRIDGE = 2
    AUX = 3


def keyed_generator(master_seed: int, path_index: int, channel: Channel, level: int = 0, *extra: int) -> np.random.Generator:
    """
    Philox generator keyed by (seed, path, channel, level, extra...).

    Each key owns an independent stream, so a path can be regenerated alone
    and results never depend on the order in which paths are drawn.
    """
    key = [int(master_seed), int(path_index), int(channel), int(level)] + [int(e) for e in extra]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def gaussian_block(
    master_seed: int,
    path_indices: Sequence[int],
    channel: Channel,
    shape: Tuple[int, ...],
    scale: float = 1.0,
    level: int = 0,
    extra: Sequence[int] = ()
) -> np.ndarray:
    """
    Standard normals for each path, stacked on axis 1.

    Returns:
        Array of shape (shape[0], len(path_indices), *shape[1:]) scaled by `scale`
    """
    draws = [
        keyed_generator(master_seed, p, channel, level, *extra).standard_normal(shape)
        for p in path_indices
    ]
    if not draws:
        return np.zeros((shape[0], 0) + tuple(shape[1:]))
    return scale * np.stack(draws, axis=1)
