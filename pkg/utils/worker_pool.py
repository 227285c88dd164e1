# GrateWave/utils/worker_pool.py

"""Deterministic fan-out of fixed-size work blocks over a thread pool."""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, TypeVar

from dotenv import load_dotenv

from utils.logger import get_logger

WORKERS_ENV = "GRATEWAVE_WORKERS"
DEFAULT_BLOCK = 256

T = TypeVar("T")

logger = get_logger("utils.worker_pool")


def resolve_worker_count(requested: Optional[int] = None) -> int:
    """
    Worker count from the CLI value, else GRATEWAVE_WORKERS (a .env file is
    honored), else 1.
    """
    if requested is not None:
        return max(1, int(requested))
    load_dotenv()
    raw = os.getenv(WORKERS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning(f"⚠️ Ignoring {WORKERS_ENV}={raw!r}: not an integer")
    return 1


def map_blocks(func: Callable[[int, int], T], n_items: int, workers: int = 1,
               block_size: int = DEFAULT_BLOCK) -> List[T]:
    """
    Calls func(start, stop) for consecutive blocks of [0, n_items) and returns
    the results in block order.

    Block boundaries depend only on n_items and block_size, never on workers.
    """
    bounds = [(start, min(start + block_size, n_items)) for start in range(0, n_items, block_size)]
    if workers <= 1 or len(bounds) <= 1:
        return [func(start, stop) for start, stop in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(func, start, stop) for start, stop in bounds]
        return [future.result() for future in futures]
