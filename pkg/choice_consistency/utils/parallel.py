"""
Consumer-level parallelism for batch commands.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Sequence, Tuple, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


def map_by_label(func: Callable[[T], R], items: Sequence[Tuple[str, T]],
                 jobs: int = 1) -> List[Tuple[str, R]]:
    """
    Apply func to every labelled item and return (label, result) pairs
    sorted by label, whatever the worker scheduling.

    func must be a module-level callable so worker processes can import it.
    """
    ordered = sorted(items, key=lambda item: item[0])
    labels = [label for label, _ in ordered]
    payloads = [payload for _, payload in ordered]
    if jobs <= 1 or len(ordered) <= 1:
        results = [func(payload) for payload in payloads]
    else:
        workers = min(jobs, len(ordered))
        logger.info(f"Running {len(ordered)} tasks on {workers} workers")
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(func, payloads))
    return list(zip(labels, results))
