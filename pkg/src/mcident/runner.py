"""Fan independent trials out to a process pool.

Each trial receives its index and the master seed and derives its own
streams from them, so results never depend on the number of workers.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from functools import partial


def default_jobs() -> int:
    return max(os.cpu_count() or 1, 1)


def _chunk(fn, master_seed, indices):
    return [fn(i, master_seed) for i in indices]


def run_trials(fn, trials: int, master_seed: int, jobs: int | None = None) -> list:
    """[fn(i, master_seed) for i in range(trials)], possibly in parallel.

    ``fn`` must be picklable (a module-level function or a partial of one).
    """
    jobs = default_jobs() if jobs is None else max(int(jobs), 1)
    if jobs == 1 or trials < 2:
        return [fn(i, master_seed) for i in range(trials)]
    size = max(1, -(-trials // (4 * jobs)))
    chunks = [range(s, min(s + size, trials)) for s in range(0, trials, size)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = pool.map(partial(_chunk, fn, master_seed), chunks)
        return [r for part in parts for r in part]
