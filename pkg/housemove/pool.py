"""Bounded worker pool for independent Monte Carlo work items.

Items (epsilon levels, y-nodes, path blocks) are scheduled under an
``asyncio.Semaphore`` and collected with ``asyncio.gather``, which keeps the
input order.  CPU work goes to a process pool when more than one worker is
requested; with a single worker the items simply run in order.

Usage::

    from housemove.pool import run_tasks_sync
    results = run_tasks_sync(partial(build_node, table=...), nodes, workers=8)

Work functions must be picklable (module-level functions or ``partial``
objects over them) and must draw all randomness from streams keyed by the item,
so results do not depend on ``workers``.
"""

from __future__ import annotations

import asyncio
import logging
from concurrent.futures import Executor, ProcessPoolExecutor
from typing import Any, Callable, Iterable, List, Sequence, TypeVar

logger = logging.getLogger(__name__)

__all__ = ["DEFAULT_WORKERS", "run_tasks", "run_tasks_sync", "chunk_ids"]

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_WORKERS = 1
DEFAULT_CHUNK = 2048  # path ids per work item


async def _run_one(
    func: Callable[[T], R],
    item: T,
    *,
    semaphore: asyncio.Semaphore,
    executor: Executor | None,
) -> R:
    async with semaphore:
        if executor is None:
            return func(item)
        loop = asyncio.get_running_loop()
        return await loop.run_in_executor(executor, func, item)


async def run_tasks(
    func: Callable[[T], R],
    items: Iterable[T],
    *,
    workers: int = DEFAULT_WORKERS,
    executor: Executor | None = None,
) -> List[R]:
    """Apply *func* to every item with at most *workers* in flight.

    Parameters
    ----------
    func
        Picklable callable taking one item.
    items
        Work items; results come back in the same order.
    workers
        Concurrency bound.  Above one a process pool is created unless an
        *executor* is supplied.
    executor
        Optional executor to reuse (tests pass a thread pool here).
    """

    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    items = list(items)
    semaphore = asyncio.Semaphore(workers)
    owned: Executor | None = None
    if executor is None and workers > 1:
        owned = executor = ProcessPoolExecutor(max_workers=workers)
    try:
        tasks = [_run_one(func, item, semaphore=semaphore, executor=executor) for item in items]
        return list(await asyncio.gather(*tasks))
    finally:
        if owned is not None:
            owned.shutdown()


def run_tasks_sync(func: Callable[[T], R], items: Iterable[T], workers: int = DEFAULT_WORKERS) -> List[R]:
    """Blocking wrapper around :func:`run_tasks`.

    A single worker runs the items inline, which keeps nested calls (a work
    item that itself fans out) free of event-loop re-entry.
    """

    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    logger.info("dispatching %d work items to %d workers", len(items), workers)
    return asyncio.run(run_tasks(func, items, workers=workers))


def chunk_ids(first_id: int, count: int, chunk: int = DEFAULT_CHUNK) -> list[Sequence[int]]:
    """Split ``first_id .. first_id + count - 1`` into fixed-size id ranges."""

    return [range(s, min(s + chunk, first_id + count)) for s in range(first_id, first_id + count, chunk)]
