"""Thread fan-out with deterministic, order-preserving results.

Worker count comes from an explicit argument, else the AGG_THREADS
environment variable, else the machine's CPU count.  Results are identical
for any worker count: tasks are independent and outputs keep input order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import ValidationError


def thread_count(requested: int | None = None) -> int:
    if requested is not None:
        if requested < 1:
            raise ValidationError(f"thread count must be >= 1, got {requested}")
        return int(requested)
    env = os.environ.get("AGG_THREADS")
    if env is not None:
        try:
            value = int(env)
        except ValueError as e:
            raise ValidationError(f"AGG_THREADS must be an integer, got {env!r}") from e
        if value < 1:
            raise ValidationError(f"AGG_THREADS must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1


def parallel_map(fn, items, threads: int | None = None) -> list:
    """Map fn over items, preserving order; falls back to serial for tiny work."""
    items = list(items)
    workers = min(thread_count(threads), len(items)) if items else 1
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
