import logging
from concurrent.futures import ThreadPoolExecutor

logger = logging.getLogger(__name__)


def parallel_map(fn, items, threads=1):
    """
    Apply fn to every item, returning results in input order.

    threads <= 1 runs inline, so results never depend on the pool size.
    """
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    workers = min(int(threads), len(items))
    logger.debug(f"Mapping {len(items)} tasks over {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def chunked(count, size):
    """(start, stop) index ranges covering range(count)"""
    if size < 1:
        raise ValueError("chunk size must be positive")
    return [(start, min(start + size, count)) for start in range(0, count, size)]
