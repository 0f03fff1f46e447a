from typing import Callable, Iterable, List, Optional

import joblib

# Progress is reported after each of at most this many chunks
PROGRESS_CHUNKS = 10


def _map(func: Callable, items: List, workers: int) -> List:
    if workers is None or workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    return joblib.Parallel(n_jobs=workers, prefer="threads")(joblib.delayed(func)(item) for item in items)


def map_fibers(func: Callable, items: Iterable, workers: int = 1,
               progress_callback: Optional[Callable[[int], None]] = None) -> List:
    """Ordered map over fibers; results do not depend on the worker count"""
    items = list(items)
    if progress_callback is None:
        return _map(func, items, workers)

    results = []
    step = max(1, -(-len(items) // PROGRESS_CHUNKS))
    for start in range(0, len(items), step):
        results.extend(_map(func, items[start:start + step], workers))
        progress_callback(int(100 * len(results) / len(items)))
    return results
