"""Fixed-chunk fan-out over path indices"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

Result = Union[np.ndarray, Tuple[np.ndarray, ...]]


def chunk_indices(n_paths: int, chunk_size: int) -> List[np.ndarray]:
    """Consecutive index blocks; the split depends only on n_paths and chunk_size"""
    return [np.arange(start, min(start + chunk_size, n_paths)) for start in range(0, n_paths, chunk_size)]


def map_paths(
    fn: Callable[[np.ndarray], Result],
    n_paths: int,
    chunk_size: int = 256,
    workers: int = 1
) -> Result:
    """
    Apply fn to every chunk of path indices and concatenate along the path axis.

    fn returns an array (or tuple of arrays) with the chunk's paths on axis 0.
    Results come back in path order whatever the worker count, so a following
    np.mean or np.sum reduces identically.
    """
    chunks = chunk_indices(n_paths, chunk_size)
    if workers <= 1 or len(chunks) == 1:
        results = [fn(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, chunks))
    logger.debug(f"Mapped {n_paths} paths in {len(chunks)} chunks on {workers} workers")
    if isinstance(results[0], tuple):
        return tuple(np.concatenate([r[i] for r in results], axis=0) for i in range(len(results[0])))
    return np.concatenate(results, axis=0)
