""" thread
    Batch execution of closed-loop runs, seeds split in chunks and the chunks
    run in parallel threads; every run builds its own scenario and planner.
"""

import logging
from dataclasses import dataclass, field
from threading import Thread
from typing import Any, Callable, Dict, List, Optional, Sequence

import pandas as pd

from LSTMPlanner.config import LSTMPConfig
from LSTMPlanner.sim import METRICS_COLUMNS

logger = logging.getLogger(__name__)


def chunk(obj: Sequence, chunk_size: int) -> List[Sequence]:
    """Split a sequence in consecutive chunks

    Args:
        obj (Sequence): input for chunking
        chunk_size (int): size of each chunk

    Returns:
        List: chunks in input order, the last one possibly shorter
    """
    if chunk_size < 1:
        raise ValueError(f"chunk_size must be at least 1, got {chunk_size}")
    return [obj[i : i + chunk_size] for i in range(0, len(obj), chunk_size)]


@dataclass
class BatchResult:
    """Rows of the finished runs and the errors of the failed ones"""

    rows: pd.DataFrame
    failures: Dict[int, BaseException] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def run_chunk(
    seeds: Sequence[int],
    job: Callable[[int], List[Dict[str, Any]]],
    queue: list,
):
    """Single thread function

    Args:
        seeds (Sequence[int]): seeds of this chunk
        job (Callable): runs one seed and returns its metrics rows
        queue (list): shared result list, receives (seed, rows, error)
    """
    for seed in seeds:
        try:
            queue.append((seed, job(seed), None))
        except Exception as exc:
            logger.warning("Seed %d failed: %s", seed, exc)
            queue.append((seed, [], exc))
    return queue


def threading(
    seeds: Sequence[int],
    job: Callable[[int], List[Dict[str, Any]]],
    threads: Optional[int] = None,
    columns: Sequence[str] = METRICS_COLUMNS,
) -> BatchResult:
    """Run `job` for every seed in parallel chunks

    Results are merged in seed order, independent of thread scheduling.

    Args:
        seeds (Sequence[int]): seeds to run
        job (Callable): runs one seed and returns its metrics rows
        threads (int, optional): number of threads, defaults to
            `LSTMPConfig.DEFAULT_THREADS`
        columns (Sequence[str], optional): column order of the result

    Returns:
        BatchResult: rows sorted by seed plus per-seed failures
    """
    seeds = list(seeds)
    threads = threads or LSTMPConfig.DEFAULT_THREADS
    queue: list = []
    if seeds:
        chunk_size = -(-len(seeds) // min(threads, len(seeds)))
        thread_list = [
            Thread(target=run_chunk, args=(part, job, queue))
            for part in chunk(seeds, chunk_size)
        ]
        # start threads
        for thread in thread_list:
            thread.start()
        # close threads
        for thread in thread_list:
            thread.join()

    order = {seed: i for i, seed in enumerate(seeds)}
    queue.sort(key=lambda item: order[item[0]])
    rows = [row for _, result, _ in queue for row in result]
    failures = {seed: exc for seed, _, exc in queue if exc is not None}
    return BatchResult(pd.DataFrame(rows, columns=list(columns)), failures)
