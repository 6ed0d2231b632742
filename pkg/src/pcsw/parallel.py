"""Process-pool runner for independent CP simulations.

Each worker runs single-threaded BLAS (the per-simulation matrices are small,
so process-level parallelism across simulations beats thread-level BLAS).
Failures are returned in place of their curves rather than aborting the pool.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

from .cpfem.solver import run_simulation


def _init_worker():
    os.environ["OMP_NUM_THREADS"] = "1"
    os.environ["OPENBLAS_NUM_THREADS"] = "1"


def _task(args):
    field, mat, load, settings = args
    try:
        return run_simulation(field, mat, load, settings)
    except Exception as exc:  # report per-sample, do not kill the pool
        return exc


def run_simulations(fields, mat, load, settings=None, workers: int = 1):
    """Run one simulation per orientation field; exceptions are returned inline."""
    jobs = [(f, mat, load, settings) for f in fields]
    if workers <= 1:
        return [_task(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker) as pool:
        return list(pool.map(_task, jobs))
