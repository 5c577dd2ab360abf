import asyncio
import logging
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import List, Optional, Sequence

import numpy as np

from ..config import settings
from ..errors import PreconditionError
from ..models.config import Experiment
from ..models.trajectory import SimTrajectory
from . import simulator
from .runconfig import config_digest, parse_config

logger = logging.getLogger(__name__)


def replica_seed(master_seed: int, replica: int) -> int:
    """Seed of replica ``replica`` (0-based) derived from the master seed.

    The first 64-bit word of SeedSequence(master_seed, spawn_key=(replica,)).
    """

    if master_seed < 0 or replica < 0:
        raise PreconditionError("master seed and replica index must be nonnegative")
    sequence = np.random.SeedSequence(master_seed, spawn_key=(replica,))
    return int(sequence.generate_state(1, np.uint64)[0])


def replica_seeds(master_seed: int, count: int) -> List[int]:
    return [replica_seed(master_seed, replica) for replica in range(count)]


def run_replica(
    experiment: Experiment,
    replica: int,
    seed: Optional[int] = None,
    digest: Optional[str] = None,
) -> SimTrajectory:
    """Run one stochastic replica of ``experiment``."""

    config = experiment.config
    if seed is None:
        seed = replica_seed(config.run.seed, replica)
    return simulator.run(
        experiment.space,
        experiment.tensor,
        experiment.ranking,
        experiment.fresh_population(),
        config.iterations,
        config.sample_interval,
        seed,
        replica=replica,
        config_digest=config_digest(experiment) if digest is None else digest,
    )


def _run_from_text(
    text: str,
    base_dir: str,
    replica: int,
    seed: int,
    digest: str,
) -> SimTrajectory:
    # Worker processes rebuild every component from the config JSON.
    experiment = parse_config(text, base_dir=base_dir)
    return run_replica(experiment, replica, seed, digest)


async def run_replicas(
    experiment: Experiment,
    seeds: Optional[Sequence[int]] = None,
) -> List[SimTrajectory]:
    """Run every replica of ``experiment`` and return them in replica order.

    Replicas fan out to a process pool when ``MAX_WORKERS > 1`` and run on
    the default executor otherwise. Each replica owns its RNG, so the result
    does not depend on scheduling.
    """

    config = experiment.config
    if seeds is None:
        seeds = replica_seeds(config.run.seed, config.run.replicas)
    digest = config_digest(experiment)
    loop = asyncio.get_running_loop()

    logger.info(
        "Running %s replicas (master seed %s, workers=%s)",
        len(seeds),
        config.run.seed,
        settings.MAX_WORKERS,
    )

    if settings.parallel_replicas and len(seeds) > 1:
        text = config.model_dump_json()
        base_dir = str(experiment.base_dir.resolve())
        with ProcessPoolExecutor(max_workers=settings.MAX_WORKERS) as pool:
            jobs = [
                loop.run_in_executor(
                    pool,
                    partial(_run_from_text, text, base_dir, replica, seed, digest),
                )
                for replica, seed in enumerate(seeds)
            ]
            return list(await asyncio.gather(*jobs))

    jobs = [
        loop.run_in_executor(
            None, partial(run_replica, experiment, replica, seed, digest)
        )
        for replica, seed in enumerate(seeds)
    ]
    return list(await asyncio.gather(*jobs))
