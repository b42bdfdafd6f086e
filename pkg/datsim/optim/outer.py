"""Outer minimization oracles applied once per round to the aggregate gradient."""
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, Literal, Optional

from datsim.core.errors import InvalidArgument
from datsim.core.params import LayeredParams

from .lamb import (
    DEFAULT_BETA1,
    DEFAULT_BETA2,
    DEFAULT_ZETA,
    LalrConfig,
    LambState,
    lalr_step,
    lamb_direction,
)
from .schedule import LearningRateSchedule
from .sgd import (
    DEFAULT_MOMENTUM,
    DEFAULT_WEIGHT_DECAY,
    SgdMomentumState,
    sgd_momentum_step,
)

OptimizerKind = Literal["lamb-lalr", "sgd-momentum"]


@dataclass
class OptimizerSnapshot:
    """Serializable optimizer state: a step counter and named tensors."""

    kind: OptimizerKind
    step: int
    tensors: Dict[str, LayeredParams] = field(default_factory=dict)


class OuterOptimizer(ABC):
    kind: OptimizerKind

    @abstractmethod
    def step(
        self, theta: LayeredParams, g_hat: LayeredParams, round_: int
    ) -> LayeredParams:
        """Return the parameters after one update with aggregate gradient g_hat."""

    @abstractmethod
    def snapshot(self) -> OptimizerSnapshot:
        ...

    @abstractmethod
    def restore(self, snapshot: OptimizerSnapshot) -> None:
        ...

    def _check_kind(self, snapshot: OptimizerSnapshot) -> None:
        if snapshot.kind != self.kind:
            raise InvalidArgument(
                f"Cannot restore a {snapshot.kind} state into {self.kind}."
            )


class LambLalr(OuterOptimizer):
    """LAMB moments with the layerwise adaptive learning rate.

    Weight decay is added to the aggregate gradient before the moment update.
    """

    kind: OptimizerKind = "lamb-lalr"

    def __init__(
        self,
        lalr: LalrConfig,
        beta1: float = DEFAULT_BETA1,
        beta2: float = DEFAULT_BETA2,
        zeta: float = DEFAULT_ZETA,
        weight_decay: float = DEFAULT_WEIGHT_DECAY,
    ):
        if weight_decay < 0:
            raise InvalidArgument(
                f"weight_decay must be nonnegative, got {weight_decay}."
            )
        self.lalr = lalr
        self.beta1 = beta1
        self.beta2 = beta2
        self.zeta = zeta
        self.weight_decay = weight_decay
        self.state: Optional[LambState] = None

    def step(
        self, theta: LayeredParams, g_hat: LayeredParams, round_: int
    ) -> LayeredParams:
        if self.state is None:
            self.state = LambState.zeros(
                theta.layout, self.beta1, self.beta2, self.zeta
            )
        if self.weight_decay:
            g_hat = g_hat + theta * self.weight_decay
        u, self.state = lamb_direction(self.state, g_hat)
        return lalr_step(theta, u, self.lalr, round_)

    def snapshot(self) -> OptimizerSnapshot:
        if self.state is None:
            return OptimizerSnapshot(self.kind, 0)
        return OptimizerSnapshot(
            self.kind, self.state.t, {"m": self.state.m, "v": self.state.v}
        )

    def restore(self, snapshot: OptimizerSnapshot) -> None:
        self._check_kind(snapshot)
        if not snapshot.tensors:
            self.state = None
            return
        self.state = LambState(
            snapshot.tensors["m"],
            snapshot.tensors["v"],
            snapshot.step,
            self.beta1,
            self.beta2,
            self.zeta,
        )


class SgdMomentum(OuterOptimizer):
    kind: OptimizerKind = "sgd-momentum"

    def __init__(
        self,
        schedule: LearningRateSchedule,
        momentum: float = DEFAULT_MOMENTUM,
        weight_decay: float = DEFAULT_WEIGHT_DECAY,
    ):
        self.schedule = schedule
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.state: Optional[SgdMomentumState] = None
        self.steps_taken = 0

    def step(
        self, theta: LayeredParams, g_hat: LayeredParams, round_: int
    ) -> LayeredParams:
        if self.state is None:
            self.state = SgdMomentumState.zeros(
                theta.layout, self.momentum, self.weight_decay
            )
        theta, self.state = sgd_momentum_step(
            theta, g_hat, self.state, self.schedule.rate(round_)
        )
        self.steps_taken += 1
        return theta

    def snapshot(self) -> OptimizerSnapshot:
        tensors = {} if self.state is None else {"velocity": self.state.velocity}
        return OptimizerSnapshot(self.kind, self.steps_taken, tensors)

    def restore(self, snapshot: OptimizerSnapshot) -> None:
        self._check_kind(snapshot)
        self.steps_taken = snapshot.step
        self.state = (
            SgdMomentumState(
                snapshot.tensors["velocity"], self.momentum, self.weight_decay
            )
            if snapshot.tensors
            else None
        )


def make_optimizer(
    kind: OptimizerKind,
    schedule: LearningRateSchedule,
    weight_decay: float = DEFAULT_WEIGHT_DECAY,
    momentum: float = DEFAULT_MOMENTUM,
    c_l: float = 0.0,
    c_u: float = 10.0,
) -> OuterOptimizer:
    if kind == "lamb-lalr":
        return LambLalr(LalrConfig(c_l, c_u, schedule), weight_decay=weight_decay)
    if kind == "sgd-momentum":
        return SgdMomentum(schedule, momentum, weight_decay)
    raise InvalidArgument(f"Unknown optimizer {kind!r}.")
