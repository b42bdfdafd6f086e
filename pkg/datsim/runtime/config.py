from dataclasses import dataclass, field
from typing import Literal

from datsim.attack.config import AttackConfig
from datsim.compress.quantizer import QuantizerConfig
from datsim.core.errors import InvalidArgument

Topology = Literal["parameter-server", "all-reduce"]

DEFAULT_PSEUDO_FRACTION = 0.5


@dataclass(frozen=True)
class ClusterConfig:
    """Simulated cluster and per-round training settings.

    ``lam`` weights the clean loss against the robust loss. When a shard holds
    pseudo-labeled samples, ``pseudo_fraction`` of every batch is drawn from
    them.
    """

    workers: int = 1
    per_worker_batch: int = 32
    topology: Topology = "parameter-server"
    quantizer: QuantizerConfig = field(default_factory=QuantizerConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    lam: float = 0.0
    rounds: int = 0
    seed: int = 0
    pseudo_fraction: float = DEFAULT_PSEUDO_FRACTION
    parallel: bool = True

    def __post_init__(self):
        if self.workers < 1:
            raise InvalidArgument(f"Need at least one worker, got {self.workers}.")
        if self.per_worker_batch < 1:
            raise InvalidArgument(
                f"per_worker_batch must be positive, got {self.per_worker_batch}."
            )
        if self.topology not in ("parameter-server", "all-reduce"):
            raise InvalidArgument(f"Unknown topology {self.topology!r}.")
        if self.topology == "all-reduce" and self.quantizer.mode == "two-sided":
            raise InvalidArgument(
                "All-reduce has no server broadcast to quantize; use one-sided."
            )
        if self.lam < 0:
            raise InvalidArgument(f"lam must be nonnegative, got {self.lam}.")
        if self.rounds < 0:
            raise InvalidArgument(f"rounds must be nonnegative, got {self.rounds}.")
        if self.seed < 0:
            raise InvalidArgument(f"seed must be nonnegative, got {self.seed}.")
        if not 0 <= self.pseudo_fraction <= 1:
            raise InvalidArgument(
                f"pseudo_fraction must lie in [0, 1], got {self.pseudo_fraction}."
            )

    @property
    def global_batch(self) -> int:
        return self.workers * self.per_worker_batch
