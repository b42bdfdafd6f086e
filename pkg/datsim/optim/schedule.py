from dataclasses import dataclass
from typing import Tuple

from datsim.core.errors import InvalidArgument

DECAY_FACTOR = 0.1


@dataclass(frozen=True)
class LearningRateSchedule:
    """Piecewise-constant learning rate with optional linear warm-up.

    The rate is multiplied by ``decay_factor`` at every fraction of
    ``total_rounds`` listed in ``decay_fractions``. During the first
    ``warmup_rounds`` rounds, round t uses (t + 1) / warmup_rounds of the base
    rate.
    """

    base: float = 0.1
    decay_fractions: Tuple[float, ...] = ()
    total_rounds: int = 1
    warmup_rounds: int = 0
    decay_factor: float = DECAY_FACTOR

    def __post_init__(self):
        if not self.base > 0:
            raise InvalidArgument(f"Base learning rate must be positive: {self.base}.")
        if any(not 0 < f < 1 for f in self.decay_fractions):
            raise InvalidArgument(
                f"Decay fractions must lie in (0, 1): {self.decay_fractions}."
            )
        if self.total_rounds < 0 or self.warmup_rounds < 0:
            raise InvalidArgument("Round counts must be nonnegative.")
        if not 0 < self.decay_factor <= 1:
            raise InvalidArgument(
                f"decay_factor must lie in (0, 1]: {self.decay_factor}."
            )
        object.__setattr__(
            self, "decay_fractions", tuple(sorted(self.decay_fractions))
        )

    @classmethod
    def constant(cls, eta: float) -> "LearningRateSchedule":
        return cls(base=eta)

    def rate(self, round_: int) -> float:
        if round_ < 0:
            raise InvalidArgument(f"Round index must be nonnegative, got {round_}.")
        if round_ < self.warmup_rounds:
            return self.base * (round_ + 1) / self.warmup_rounds
        decays = sum(1 for f in self.decay_fractions if round_ >= f * self.total_rounds)
        return self.base * self.decay_factor**decays
