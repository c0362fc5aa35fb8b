"""
Seeded trial ensembles

Every trial owns a Philox generator derived from (master_seed, trial index),
so results do not depend on how trials are split across worker processes.
Blocks of trials fan out over a multiprocessing pool and come back merged in
trial order.
"""
import logging
from multiprocessing import Pool

import numpy as np

logger = logging.getLogger("cointurn.ensemble")


def seeded_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    """Generator for one trial of an ensemble"""
    sequence = np.random.SeedSequence(master_seed, spawn_key=(trial,))
    return np.random.Generator(np.random.Philox(sequence))


def derive_seed(master_seed: int, *labels: int) -> int:
    """A 63-bit seed for a sub-experiment, stable across runs"""
    state = np.random.SeedSequence([master_seed, *labels]).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def _run_block(task, master_seed: int, start: int, stop: int):
    return [task(trial, trial_rng(master_seed, trial)) for trial in range(start, stop)]


def _blocks(trials: int, workers: int):
    size = -(-trials // workers)
    return [(start, min(start + size, trials)) for start in range(0, trials, size)]


def run_trials(task, trials: int, master_seed: int, workers: int = 1) -> list:
    """
    Run task(trial, rng) for every trial index

    Args:
        task: picklable callable returning one trial's result
        trials: number of trials
        master_seed: ensemble seed
        workers: process count; 1 runs inline

    Returns:
        List of per-trial results ordered by trial index
    """
    if trials <= 0:
        return []
    logger.info(f"Running {trials} trials (seed {master_seed}, {workers} worker(s))")
    if workers <= 1 or trials < 2 * workers:
        results = _run_block(task, master_seed, 0, trials)
    else:
        jobs = [(task, master_seed, start, stop) for start, stop in _blocks(trials, workers)]
        with Pool(processes=workers) as pool:
            chunks = pool.starmap(_run_block, jobs)
        results = [item for chunk in chunks for item in chunk]
    logger.info(f"Finished {trials} trials")
    return results
