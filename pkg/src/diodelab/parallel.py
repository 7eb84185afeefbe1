"""Worker-count resolution and an order-preserving process map."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "DIODELAB_WORKERS"


def resolve_workers(flag: int | None = None) -> int:
    """Flag first, then the environment, then the machine's CPU count."""
    if flag is not None:
        value = flag
    elif os.environ.get(WORKERS_ENV, "").strip():
        try:
            value = int(os.environ[WORKERS_ENV])
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {os.environ[WORKERS_ENV]!r}") from None
    else:
        value = os.cpu_count() or 1
    if value < 1:
        raise ValueError(f"worker count must be at least 1, got {value}")
    return value


def ordered_map(fn, items, workers: int = 1) -> list:
    """``[fn(i) for i in items]``, fanned out over processes when ``workers > 1``.

    Results come back in input order, so output assembly does not depend on
    scheduling.  ``fn`` must be picklable (a module-level function or a
    ``functools.partial`` of one).
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
