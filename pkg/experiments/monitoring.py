"""
Per-cell run logging for sweeps.
"""
from contextlib import contextmanager
import logging
import time

logger = logging.getLogger('runs')


class CellTracker:
    """Status holder for one tracked cell."""

    def __init__(self, label: str):
        self.label = label
        self.status = 'ok'
        self.start_time = time.time()
        self.duration = 0.0

    def fail(self, reason: str):
        self.status = 'failed'
        logger.warning(f"Cell {self.label} failed: {reason}")


@contextmanager
def track_cell(label: str):
    """Log cell start and end with duration and status."""
    tracker = CellTracker(label)
    logger.info(f"Cell start: {label}")
    try:
        yield tracker
    except Exception as exc:
        tracker.status = 'error'
        logger.error(f"Cell error: {label} - {exc.__class__.__name__}: {exc}")
        raise
    finally:
        tracker.duration = time.time() - tracker.start_time
        logger.info(f"Cell end: {label} - Status: {tracker.status} - Duration: {tracker.duration:.3f}s")
