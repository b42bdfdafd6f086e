"""Worker side of a round: sample, attack, differentiate, compress."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np

from datsim.attack.oracles import solve
from datsim.compress.quantizer import QuantizedGradMessage, decode, quantize, raw_bits
from datsim.core import Tags
from datsim.core.errors import InvalidArgument, NumericError
from datsim.core.params import LayeredParams, Layout
from datsim.core.rng import SERVER_ID, SeededRng
from datsim.core.tracing import get_tracer, span
from datsim.data.dataset import Dataset, Indices

from .config import ClusterConfig
from .objective import RobustObjective

Payload = Union[QuantizedGradMessage, LayeredParams]

tracer = get_tracer(__name__)


@dataclass(frozen=True)
class WorkerState:
    worker_id: int
    shard: Dataset
    seed: int

    def stream(self, round_: int, tag: str) -> SeededRng:
        return SeededRng.for_stream(self.seed, self.worker_id, round_, tag)


@dataclass(frozen=True)
class WorkerUpdate:
    """What a worker sends after one round, plus local bookkeeping."""

    worker_id: int
    payload: Payload
    loss: float
    resampled: bool
    attack_ms: float
    grad_ms: float

    @property
    def bits(self) -> int:
        if isinstance(self.payload, QuantizedGradMessage):
            return self.payload.bits_used
        return raw_bits(self.payload.total_dim)

    def gradient(self, layout: Layout) -> LayeredParams:
        if isinstance(self.payload, QuantizedGradMessage):
            return LayeredParams.unflatten(layout, decode(self.payload))
        return self.payload


def shard(dataset: Dataset, workers: int, seed: int) -> List[WorkerState]:
    """Seeded split into disjoint shards whose sizes differ by at most one."""
    if workers <= 0:
        raise InvalidArgument(f"Need at least one worker, got {workers}.")
    if len(dataset) < workers:
        raise InvalidArgument(
            f"Cannot split {len(dataset)} samples between {workers} workers."
        )
    perm = (
        SeededRng.for_stream(seed, SERVER_ID, 0, Tags.SHARD)
        .generator()
        .permutation(len(dataset))
    )
    return [
        WorkerState(w, dataset.subset(np.sort(part)), seed)
        for w, part in enumerate(np.array_split(perm, workers))
    ]


def _draw(
    rng: np.random.Generator, pool: Indices, count: int
) -> Tuple[Indices, bool]:
    if count == 0:
        return pool[:0], False
    if count > pool.size:
        return rng.choice(pool, size=count, replace=True), True
    return rng.choice(pool, size=count, replace=False), False


def sample_batch(
    worker: WorkerState, batch_size: int, round_: int, pseudo_fraction: float
) -> Tuple[Indices, bool]:
    """Indices of this round's batch, sorted, and whether replacement was needed.

    Sampling is without replacement unless the shard is smaller than the batch.
    Shards mixing labeled and pseudo-labeled samples contribute
    round(pseudo_fraction * B) pseudo-labeled entries.
    """
    rng = worker.stream(round_, Tags.BATCH).generator()
    data = worker.shard
    pseudo = data.pseudo_indices()
    labeled = data.labeled_indices()
    if pseudo.size and labeled.size:
        n_pseudo = int(round(pseudo_fraction * batch_size))
        first, r1 = _draw(rng, labeled, batch_size - n_pseudo)
        second, r2 = _draw(rng, pseudo, n_pseudo)
        return np.sort(np.concatenate([first, second])), r1 or r2
    chosen, resampled = _draw(rng, np.arange(len(data)), batch_size)
    return np.sort(chosen), resampled


def worker_round(
    worker: WorkerState,
    theta: LayeredParams,
    objective: RobustObjective,
    cfg: ClusterConfig,
    round_: int,
) -> WorkerUpdate:
    if len(worker.shard) == 0:
        raise InvalidArgument(f"Worker {worker.worker_id} has an empty shard.")
    indices, resampled = sample_batch(
        worker, cfg.per_worker_batch, round_, cfg.pseudo_fraction
    )
    batch = worker.shard.batch(indices)

    start = time.perf_counter()
    with span(tracer, name="attack"):
        delta = solve(
            objective.inner_problem(theta, batch),
            cfg.attack,
            worker.stream(round_, Tags.ATTACK),
        )
    attack_done = time.perf_counter()
    with span(tracer, name="local gradient"):
        grad = objective.local_gradient(theta, batch, delta, cfg.lam)
        loss = objective.local_loss(theta, batch, delta, cfg.lam)
    if not (grad.is_finite() and np.isfinite(loss)):
        raise NumericError(f"worker {worker.worker_id} gradient", loss)

    payload: Payload = grad
    if cfg.quantizer.enabled:
        with span(tracer, name="quantize"):
            payload = quantize(
                grad.flatten(),
                cfg.quantizer.bits,
                worker.stream(round_, Tags.QUANTIZE),
            )
    grad_done = time.perf_counter()
    return WorkerUpdate(
        worker.worker_id,
        payload,
        loss,
        resampled,
        attack_ms=1000.0 * (attack_done - start),
        grad_ms=1000.0 * (grad_done - attack_done),
    )
