"""Bounded worker pool for sweep points.

ARCHITECTURE:
┌─────────────┐   run_in_executor   ┌──────────────────────┐
│  sweep cmd  │ ──────────────────> │ ProcessPoolExecutor  │
│  (asyncio)  │ <────────────────── │  (one run per task)  │
└─────────────┘      results        └──────────────────────┘

Each task owns its simulation state; results come back in submission order
and are assembled single-threaded after ``map`` returns. With one worker the
pool runs tasks inline in the event loop's thread, so results do not depend
on the worker count.
"""

import asyncio
import functools
import logging
from concurrent.futures import ProcessPoolExecutor
from concurrent.futures.process import BrokenProcessPool
from typing import Any, Callable, Iterable, List, Optional, TypeVar

from .errors import LabError, ParameterError

logger = logging.getLogger(__name__)

R = TypeVar("R")


class SweepPoolError(LabError):
    """A worker process died or the pool is unusable."""
    pass


class SweepPool:
    """Async front end over a process pool.

    Usage::

        async with SweepPool(workers=4) as pool:
            results = await pool.map(run_point, points)
    """

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ParameterError(f"workers must be >= 1, got {workers}")
        self.workers = workers
        self.executor: Optional[ProcessPoolExecutor] = None
        self.lock = asyncio.Lock()
        self._started = False
        self.tasks_run = 0

    @property
    def inline(self) -> bool:
        return self.workers == 1

    async def start(self):
        async with self.lock:
            if self._started:
                return
            if not self.inline:
                self.executor = ProcessPoolExecutor(max_workers=self.workers)
            self._started = True
            logger.debug("sweep pool started with %d worker(s)", self.workers)

    async def stop(self):
        async with self.lock:
            if self.executor is not None:
                try:
                    self.executor.shutdown(wait=True)
                finally:
                    self.executor = None
            if self._started:
                logger.debug("sweep pool stopped after %d task(s)", self.tasks_run)
            self._started = False

    async def submit(self, fn: Callable[..., R], *args: Any) -> R:
        """Run ``fn(*args)`` on a worker. ``fn`` and its arguments must pickle.

        Raises:
            SweepPoolError: the worker process died
        """
        if not self._started:
            await self.start()
        self.tasks_run += 1
        if self.executor is None:
            return fn(*args)
        loop = asyncio.get_running_loop()
        try:
            return await loop.run_in_executor(self.executor, functools.partial(fn, *args))
        except BrokenProcessPool as e:
            raise SweepPoolError(f"sweep worker died: {e}") from e

    async def map(self, fn: Callable[[Any], R], items: Iterable[Any]) -> List[R]:
        """``[fn(item) for item in items]`` across the workers, in order."""
        items = list(items)
        if self.inline:
            return [await self.submit(fn, item) for item in items]
        return list(await asyncio.gather(*(self.submit(fn, item) for item in items)))

    async def __aenter__(self):
        await self.start()
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb):
        await self.stop()
