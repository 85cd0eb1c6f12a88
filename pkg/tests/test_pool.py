import threading
import time
from concurrent.futures import ThreadPoolExecutor

import pytest

from housemove.pool import chunk_ids, run_tasks, run_tasks_sync


def _square(x):
    return x * x


@pytest.mark.asyncio
async def test_run_tasks_keeps_input_order():
    with ThreadPoolExecutor(max_workers=4) as ex:
        out = await run_tasks(_square, range(10), workers=4, executor=ex)
    assert out == [i * i for i in range(10)]


@pytest.mark.asyncio
async def test_run_tasks_respects_the_worker_bound():
    lock = threading.Lock()
    active = {"now": 0, "peak": 0}

    def slow(x):
        with lock:
            active["now"] += 1
            active["peak"] = max(active["peak"], active["now"])
        time.sleep(0.01)
        with lock:
            active["now"] -= 1
        return x

    with ThreadPoolExecutor(max_workers=8) as ex:
        out = await run_tasks(slow, range(12), workers=2, executor=ex)
    assert out == list(range(12))
    assert active["peak"] <= 2


@pytest.mark.asyncio
async def test_run_tasks_rejects_zero_workers():
    with pytest.raises(ValueError):
        await run_tasks(_square, [1], workers=0)


def test_single_worker_runs_inline():
    seen = []
    out = run_tasks_sync(lambda x: seen.append(x) or x + 1, [3, 1, 2], workers=1)
    assert out == [4, 2, 3]
    assert seen == [3, 1, 2]


def test_chunk_ids_cover_the_range():
    chunks = chunk_ids(5, 10, chunk=4)
    assert [list(c) for c in chunks] == [[5, 6, 7, 8], [9, 10, 11, 12], [13, 14]]
    assert chunk_ids(0, 0) == []
