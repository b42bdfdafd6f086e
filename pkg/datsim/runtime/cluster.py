"""Round loop of the simulated cluster."""
import asyncio
import time
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from datsim.core.errors import NumericError
from datsim.core.params import LayeredParams
from datsim.core.tracing import get_tracer, span
from datsim.core.utils import async_to_sync
from datsim.data.dataset import Dataset
from datsim.models.zoo import ModelSpec
from datsim.optim.outer import OuterOptimizer

from .checkpoint import CheckpointData, save_checkpoint
from .config import ClusterConfig
from .errors import NonFiniteLoss
from .objective import RobustObjective
from .server import Aggregate, aggregate
from .topology import account_round, build_topology, worker_nodes
from .worker import WorkerUpdate, shard, worker_round

tracer = get_tracer(__name__)

PHASES = ("attack", "grad", "agg", "step")


@dataclass
class RoundMetrics:
    round_: int
    train_loss: float
    grad_norm: float
    bits_up: int
    bits_down: int
    resampled: bool = False
    wall_ms: Dict[str, float] = field(default_factory=dict)


@dataclass
class TrainingResult:
    theta: LayeredParams
    metrics: List[RoundMetrics]
    checkpoint: Optional[Path] = None


RoundCallback = Callable[[RoundMetrics, LayeredParams], None]


class ClusterRuntime:
    """M simulated workers and one aggregation point executing DAT rounds.

    Workers of a round run concurrently on a thread pool when
    ``cfg.parallel`` is set. Their results are reduced in ascending worker
    order, so parallel and sequential runs are bit-identical.
    """

    def __init__(
        self,
        cfg: ClusterConfig,
        objective: RobustObjective,
        dataset: Dataset,
        optimizer: OuterOptimizer,
        model: Optional[ModelSpec] = None,
        checkpoint_dir: Optional[Path] = None,
    ):
        self.cfg = cfg
        self.objective = objective
        self.optimizer = optimizer
        self.model = model
        self.checkpoint_dir = checkpoint_dir
        self.workers = shard(dataset, cfg.workers, cfg.seed)
        self.graph = build_topology(cfg.topology, cfg.workers)
        self.callback: RoundCallback
        self.set_callback(None)

    def set_callback(self, callback: Optional[RoundCallback]):
        """Set a function called with the metrics and parameters after every
        round. Can be used to observe or evaluate training as it runs."""
        self.callback = callback if callback is not None else lambda _1, _2: None

    async def _gather_updates(
        self, theta: LayeredParams, round_: int, executor: Optional[Executor]
    ) -> List[WorkerUpdate]:
        jobs = [
            partial(worker_round, w, theta, self.objective, self.cfg, round_)
            for w in self.workers
        ]
        if executor is None:
            return [job() for job in jobs]
        loop = asyncio.get_running_loop()
        return list(
            await asyncio.gather(*(loop.run_in_executor(executor, job) for job in jobs))
        )

    async def aggregate_round(
        self, theta: LayeredParams, round_: int, executor: Optional[Executor] = None
    ) -> Tuple[Aggregate, List[WorkerUpdate], float]:
        """Worker phase and aggregation of one round, without the update.

        Also returns the aggregation wall time in milliseconds.
        """
        with span(tracer, name="workers"):
            updates = await self._gather_updates(theta, round_, executor)
        workers_done = time.perf_counter()
        with span(tracer, name="aggregate"):
            agg = aggregate(
                updates, theta.layout, self.cfg.quantizer, self.cfg.seed, round_
            )
        return agg, updates, 1000.0 * (time.perf_counter() - workers_done)

    async def run_round(
        self, theta: LayeredParams, round_: int, executor: Optional[Executor] = None
    ) -> Tuple[LayeredParams, RoundMetrics]:
        agg, updates, agg_ms = await self.aggregate_round(theta, round_, executor)
        agg_done = time.perf_counter()
        with span(tracer, name="step"):
            new_theta = self.optimizer.step(theta, agg.g_hat, round_)
        step_done = time.perf_counter()
        if not new_theta.is_finite():
            raise NumericError("parameters after the outer update")

        by_id = {u.worker_id: u for u in updates}
        ordered = [by_id[w] for w in worker_nodes(self.graph)]
        bits_up, bits_down = account_round(
            self.graph, {u.worker_id: u.bits for u in ordered}, agg.broadcast_bits
        )
        metrics = RoundMetrics(
            round_=round_,
            train_loss=sum(u.loss for u in ordered) / len(ordered),
            grad_norm=agg.g_hat.norm(),
            bits_up=bits_up,
            bits_down=bits_down,
            resampled=any(u.resampled for u in ordered),
            wall_ms={
                "attack": max(u.attack_ms for u in ordered),
                "grad": max(u.grad_ms for u in ordered),
                "agg": agg_ms,
                "step": 1000.0 * (step_done - agg_done),
            },
        )
        return new_theta, metrics

    def checkpoint_data(
        self, theta: LayeredParams, round_: int, diagnostic: bool = False
    ) -> CheckpointData:
        return CheckpointData(
            theta=theta,
            round_=round_,
            seed=self.cfg.seed,
            objective=self.objective.name,
            model=self.model,
            optimizer=self.optimizer.snapshot(),
            diagnostic=diagnostic,
        )

    def _write_checkpoint(
        self, theta: LayeredParams, round_: int, diagnostic: bool
    ) -> Optional[Path]:
        if self.checkpoint_dir is None:
            return None
        name = f"diagnostic-round-{round_}.ckpt" if diagnostic else "final.ckpt"
        path = self.checkpoint_dir / name
        save_checkpoint(path, self.checkpoint_data(theta, round_, diagnostic))
        return path

    async def run(
        self, theta: LayeredParams, rounds: Optional[int] = None, start_round: int = 0
    ) -> TrainingResult:
        total = self.cfg.rounds if rounds is None else rounds
        metrics: List[RoundMetrics] = []
        executor = (
            ThreadPoolExecutor(max_workers=self.cfg.workers)
            if self.cfg.parallel and self.cfg.workers > 1
            else None
        )
        try:
            for round_ in range(start_round, start_round + total):
                with span(tracer, name=f"round {round_}"):
                    try:
                        theta, round_metrics = await self.run_round(
                            theta, round_, executor
                        )
                    except NumericError as e:
                        path = self._write_checkpoint(theta, round_, diagnostic=True)
                        raise NonFiniteLoss(
                            round_, None if path is None else str(path)
                        ) from e
                metrics.append(round_metrics)
                self.callback(round_metrics, theta)
        finally:
            if executor is not None:
                executor.shutdown()
        path = self._write_checkpoint(theta, start_round + total, diagnostic=False)
        return TrainingResult(theta, metrics, path)


async def run_training(
    cfg: ClusterConfig,
    objective: RobustObjective,
    dataset: Dataset,
    optimizer: OuterOptimizer,
    theta0: LayeredParams,
    model: Optional[ModelSpec] = None,
    checkpoint_dir: Optional[Path] = None,
    callback: Optional[RoundCallback] = None,
) -> TrainingResult:
    """Run ``cfg.rounds`` rounds from theta0 and return the final parameters."""
    runtime = ClusterRuntime(cfg, objective, dataset, optimizer, model, checkpoint_dir)
    runtime.set_callback(callback)
    return await runtime.run(theta0)


run_training_block = async_to_sync(run_training)
