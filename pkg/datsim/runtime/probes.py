"""Sampling-noise measurements of the aggregate gradient."""
from dataclasses import dataclass

import numpy as np

from datsim.core.errors import InvalidArgument
from datsim.core.params import LayeredParams
from datsim.core.utils import async_to_sync
from datsim.data.dataset import Dataset
from datsim.optim.outer import SgdMomentum
from datsim.optim.schedule import LearningRateSchedule

from .cluster import ClusterRuntime
from .config import ClusterConfig
from .objective import RobustObjective

MIN_TRIALS = 30


@dataclass(frozen=True)
class VarianceReport:
    workers: int
    per_worker_batch: int
    trials: int
    variance: float


async def variance_probe(
    theta: LayeredParams,
    objective: RobustObjective,
    dataset: Dataset,
    cfg: ClusterConfig,
    trials: int,
) -> VarianceReport:
    """Trace of the empirical covariance of the aggregate gradient at fixed theta.

    Trial k runs the worker phase and aggregation of round k, so every trial
    draws fresh batches, attack initialisations and quantizer noise.
    """
    if trials < MIN_TRIALS:
        raise InvalidArgument(f"Need at least {MIN_TRIALS} trials, got {trials}.")
    # the optimizer is never stepped
    runtime = ClusterRuntime(
        cfg, objective, dataset, SgdMomentum(LearningRateSchedule.constant(1.0))
    )
    samples = np.empty((trials, theta.total_dim))
    for k in range(trials):
        agg, _, _ = await runtime.aggregate_round(theta, k)
        samples[k] = agg.g_hat.flatten()
    variance = float(np.sum(np.var(samples, axis=0, ddof=1)))
    return VarianceReport(cfg.workers, cfg.per_worker_batch, trials, variance)


variance_probe_block = async_to_sync(variance_probe)
