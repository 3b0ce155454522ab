"""Seed-per-shard Monte-Carlo reduction"""
from concurrent.futures import ThreadPoolExecutor
from math import sqrt
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray

from app.core.config import Settings, settings
from app.core.errors import DomainError
from app.core.logger import dist_logger
from app.schemas.extremes import MonteCarloEstimate
from app.services.distcore import Rng, spawn_rngs

DrawFn = Callable[[Rng, int], NDArray[np.float64]]


def shard_sizes(n_draws: int, n_shards: int) -> list[int]:
    """Split n_draws into n_shards nearly equal parts"""
    base, extra = divmod(n_draws, n_shards)
    return [base + (1 if i < extra else 0) for i in range(n_shards)]


def sharded_mean(
        draw: DrawFn,
        n_draws: int,
        seed: Optional[int],
        n_shards: Optional[int] = None,
        workers: Optional[int] = None,
        config: Optional[Settings] = None,
) -> MonteCarloEstimate:
    """
    Mean and standard error of draw(rng, size) values over independent shards

    Each shard gets its own generator spawned from seed and the shard sums are
    merged in shard order, so the result depends on (seed, n_shards) only and
    never on the worker count.

    Args:
        draw: Returns `size` values using the given generator
        n_draws: Total number of values
        seed: Root seed
        n_shards: Number of shards (default config.MC_SHARDS)
        workers: Thread pool size (default config.WORKERS)
        config: Settings for the defaults (module settings when omitted)

    Returns:
        MonteCarloEstimate
    """
    if n_draws < 2:
        raise DomainError(f"n_draws must be >= 2, got {n_draws}")

    config = config or settings
    n_shards = min(n_shards or config.MC_SHARDS, n_draws)
    workers = workers or config.WORKERS
    sizes = shard_sizes(n_draws, n_shards)
    rngs = spawn_rngs(seed, n_shards)

    def run(i: int) -> tuple[float, float]:
        values = np.asarray(draw(rngs[i], sizes[i]), dtype=float)
        return float(values.sum()), float(np.square(values).sum())

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(run, range(n_shards)))
    else:
        partials = [run(i) for i in range(n_shards)]

    total = sum(s for s, _ in partials)
    total_sq = sum(q for _, q in partials)
    mean = total / n_draws
    variance = max(total_sq / n_draws - mean * mean, 0.0) * n_draws / (n_draws - 1)

    dist_logger.debug(f"Monte-Carlo mean over {n_draws} draws in {n_shards} shards: {mean:.6g}")
    return MonteCarloEstimate(value=mean, std_error=sqrt(variance / n_draws), n_draws=n_draws)
