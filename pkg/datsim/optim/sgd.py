from dataclasses import dataclass, replace
from typing import Tuple

from datsim.core.errors import InvalidArgument
from datsim.core.params import LayeredParams, Layout

DEFAULT_MOMENTUM = 0.9
DEFAULT_WEIGHT_DECAY = 1e-4


@dataclass(frozen=True)
class SgdMomentumState:
    velocity: LayeredParams
    momentum: float = DEFAULT_MOMENTUM
    weight_decay: float = DEFAULT_WEIGHT_DECAY

    def __post_init__(self):
        if not 0 <= self.momentum < 1:
            raise InvalidArgument(f"momentum must lie in [0, 1), got {self.momentum}.")
        if self.weight_decay < 0:
            raise InvalidArgument(
                f"weight_decay must be nonnegative, got {self.weight_decay}."
            )

    @classmethod
    def zeros(
        cls,
        layout: Layout,
        momentum: float = DEFAULT_MOMENTUM,
        weight_decay: float = DEFAULT_WEIGHT_DECAY,
    ) -> "SgdMomentumState":
        return cls(LayeredParams.zeros(layout), momentum, weight_decay)


def sgd_momentum_step(
    theta: LayeredParams, g_hat: LayeredParams, state: SgdMomentumState, eta: float
) -> Tuple[LayeredParams, SgdMomentumState]:
    """velocity <- momentum * velocity + g + weight_decay * theta.

    theta then moves by -eta * velocity.
    """
    theta.check_layout(g_hat)
    theta.check_layout(state.velocity)
    velocity = state.velocity * state.momentum + (g_hat + theta * state.weight_decay)
    return theta - velocity * eta, replace(state, velocity=velocity)
