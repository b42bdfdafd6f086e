"""Simulated distributed adversarial training: workers, server and round loop."""

from .checkpoint import CheckpointData, load_checkpoint, save_checkpoint
from .cluster import (
    ClusterRuntime,
    RoundMetrics,
    TrainingResult,
    run_training,
    run_training_block,
)
from .config import ClusterConfig, Topology
from .errors import CheckpointError, NonFiniteLoss, ProtocolError
from .objective import ClassifierObjective, QuadraticGame, RobustObjective
from .probes import VarianceReport, variance_probe, variance_probe_block
from .server import Aggregate, aggregate
from .topology import account_round, build_topology
from .worker import WorkerState, WorkerUpdate, sample_batch, shard, worker_round
