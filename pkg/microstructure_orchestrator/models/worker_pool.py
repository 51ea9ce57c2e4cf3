# -*- coding: utf-8 -*-

import anyio
import structlog

_logger = structlog.get_logger(__name__)


def run_parallel(fn, items, workers=1):
    """Apply fn to every item, up to `workers` at a time in threads.

    Results come back in input order whatever the completion order, and the
    first failing item (in input order) re-raises its own exception.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    results = [None] * len(items)
    failures = [None] * len(items)

    async def _run_one(index, item, limiter):
        try:
            results[index] = await anyio.to_thread.run_sync(fn, item, limiter=limiter)
        except Exception as e:
            failures[index] = e

    async def _run_all():
        limiter = anyio.CapacityLimiter(workers)
        async with anyio.create_task_group() as tg:
            for index, item in enumerate(items):
                tg.start_soon(_run_one, index, item, limiter)

    _logger.debug("worker_pool_started", items=len(items), workers=workers)
    anyio.run(_run_all)

    for failure in failures:
        if failure is not None:
            raise failure
    return results
