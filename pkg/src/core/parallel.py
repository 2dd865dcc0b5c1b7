"""Seeded, chunked work distribution.

A master seed is expanded with numpy's SeedSequence into one child stream
per realization, and realizations are grouped into fixed-size chunks. Both
depend only on the run definition, so results are identical for any
number of worker processes.
"""

from __future__ import annotations

import logging
from multiprocessing import Pool
from typing import Any, Callable, Dict, List, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


def spawn_streams(master_seed: int, count: int) -> List[np.random.SeedSequence]:
    """Child seed sequences; child k is the same for any `count` > k."""
    return np.random.SeedSequence(master_seed).spawn(count)


def chunk_ranges(n_items: int, chunk_size: int) -> List[Tuple[int, int]]:
    if chunk_size < 1:
        raise ValueError(f"chunk_size must be positive, got {chunk_size}")
    return [(start, min(start + chunk_size, n_items)) for start in range(0, n_items, chunk_size)]


def seed_record(master_seed: int, count: int, chunk_size: int) -> Dict[str, Any]:
    """Seed expansion description stored in run manifests."""
    return {
        "master_seed": int(master_seed),
        "scheme": "numpy.random.SeedSequence.spawn",
        "n_streams": int(count),
        "spawn_keys": [0, count - 1] if count else [],
        "chunk_size": int(chunk_size),
    }


def run_tasks(func: Callable[[Any], Any], tasks: Sequence[Any], workers: int = 1) -> List[Any]:
    """Apply `func` to every task, preserving task order in the result.

    With more than one worker the tasks go through a multiprocessing Pool;
    `func` and the tasks must then be picklable (module-level callables or
    functools.partial).
    """
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [func(task) for task in tasks]
    n_proc = min(workers, len(tasks))
    logger.info(f"Dispatching {len(tasks)} tasks to {n_proc} worker processes")
    with Pool(processes=n_proc) as pool:
        return list(pool.imap(func, tasks))

