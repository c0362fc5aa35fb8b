"""
Shared cache of martingale coefficient tables

Tables are keyed by (schedule, capacity, tolerance) and built at most once
per process.
Capacity is always a power of two derived from the request, so a given
request sees the same table no matter what was asked for before.
"""
import logging
import threading

logger = logging.getLogger("cointurn.cache")

MIN_CAPACITY = 1024

# Global table store
_tables = {}
_lock = threading.Lock()


def capacity_for(m: int) -> int:
    """Smallest power of two >= max(m + 1, MIN_CAPACITY)"""
    need = max(m + 1, MIN_CAPACITY)
    return 1 << (need - 1).bit_length()


def get_table(schedule, capacity: int, build, tol: float):
    """
    Get or build the coefficient table for a schedule

    Args:
        schedule: the schedule model
        capacity: table size, a power of two
        build: callable (schedule, capacity, tol) -> CoefficientTable
        tol: series tolerance for the head coefficient, part of the key

    Returns:
        The cached CoefficientTable
    """
    key = (schedule.cache_key(), capacity, tol)
    table = _tables.get(key)
    if table is not None:
        return table

    with _lock:
        table = _tables.get(key)
        if table is None:
            logger.info(f"Building coefficient table of capacity {capacity} for {schedule.kind}")
            table = build(schedule, capacity, tol)
            _tables[key] = table
    return table

    with _lock:
        table = _tables.get(key)
        if table is None:
            logger.info(f"Building coefficient table of capacity {capacity} for {schedule.kind}")
            table = build(schedule, capacity)
            _tables[key] = table
    return table


def cache_size() -> int:
    return len(_tables)


def clear_cache():
    """Drop every cached table"""
    with _lock:
        if _tables:
            logger.info(f"Clearing {len(_tables)} cached coefficient tables")
        _tables.clear()
