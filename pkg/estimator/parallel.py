"""
Process pools for independent evaluations.

Workers are spawned (never forked) so torch and BLAS state start clean; each
worker pins torch to one thread and configures logging from the project
settings dict.
"""
import logging
import logging.config
import multiprocessing
import os
from typing import Callable, Iterable, List, Optional

import torch

logger = logging.getLogger('estimator')


def _init_worker(logging_config: Optional[dict]):
    torch.set_num_threads(1)
    if os.getenv('DJANGO_SETTINGS_MODULE'):
        import django

        django.setup()
    if logging_config:
        logging.config.dictConfig(logging_config)


def _logging_config() -> Optional[dict]:
    try:
        from django.conf import settings

        return settings.LOGGING if settings.configured else None
    except Exception:
        return None


def worker_pool(workers: int):
    """Spawned multiprocessing pool with per-worker logging; None for one worker."""
    if workers is None or workers <= 1:
        return None
    context = multiprocessing.get_context('spawn')
    logger.info(f"Starting pool of {workers} workers")
    return context.Pool(workers, initializer=_init_worker, initargs=(_logging_config(),))


def pool_starmap(pool, func: Callable, tasks: Iterable[tuple]) -> List:
    """Ordered results; runs in-process without a pool."""
    tasks = list(tasks)
    if pool is None:
        return [func(*task) for task in tasks]
    return pool.starmap(func, tasks)
