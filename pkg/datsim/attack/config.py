from dataclasses import dataclass, replace
from typing import Literal, Optional

import numpy as np

from datsim.core.errors import InvalidArgument

AttackKind = Literal["fgsm", "pgd", "exact-quadratic"]
InitKind = Literal["zero", "uniform"]

DEFAULT_PGD_STEPS = 10
DEFAULT_EVAL_STEPS = 20
# fast adversarial training preset for one-shot attacks
FGSM_STEP_RATIO = 1.25
PGD_STEP_RATIO = 0.25


@dataclass(frozen=True)
class AttackConfig:
    """Inner maximization oracle settings.

    ``steps`` and ``step_size`` resolve to defaults when left unset: one step
    of size 1.25 epsilon for FGSM, ten steps of size epsilon / 4 for PGD.
    """

    kind: AttackKind = "pgd"
    epsilon: float = 0.1
    steps: Optional[int] = None
    step_size: Optional[float] = None
    init: InitKind = "zero"

    def __post_init__(self):
        if self.kind not in ("fgsm", "pgd", "exact-quadratic"):
            raise InvalidArgument(f"Unknown attack kind {self.kind!r}.")
        if self.init not in ("zero", "uniform"):
            raise InvalidArgument(f"Unknown attack init {self.init!r}.")
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise InvalidArgument(f"epsilon must be finite and >= 0: {self.epsilon}.")
        steps = self.steps
        if steps is None:
            steps = DEFAULT_PGD_STEPS if self.kind == "pgd" else 1
        if self.kind == "fgsm" and steps != 1:
            raise InvalidArgument(f"FGSM takes exactly one step, got {steps}.")
        if steps < 1:
            raise InvalidArgument(f"Attacks need at least one step, got {steps}.")
        step_size = self.step_size
        if step_size is None:
            ratio = FGSM_STEP_RATIO if self.kind == "fgsm" else PGD_STEP_RATIO
            # any positive size works on the degenerate ball
            step_size = ratio * self.epsilon if self.epsilon > 0 else 1.0
        if not (np.isfinite(step_size) and step_size > 0):
            raise InvalidArgument(
                f"step_size must be finite and positive, got {step_size}."
            )
        object.__setattr__(self, "steps", int(steps))
        object.__setattr__(self, "step_size", float(step_size))

    @classmethod
    def fgsm(
        cls,
        epsilon: float,
        step_size: Optional[float] = None,
        init: InitKind = "zero",
    ) -> "AttackConfig":
        return cls("fgsm", epsilon, 1, step_size, init)

    @classmethod
    def pgd(
        cls,
        epsilon: float,
        steps: int = DEFAULT_PGD_STEPS,
        step_size: Optional[float] = None,
        init: InitKind = "zero",
    ) -> "AttackConfig":
        return cls("pgd", epsilon, steps, step_size, init)

    @classmethod
    def exact(cls, epsilon: float) -> "AttackConfig":
        return cls("exact-quadratic", epsilon)

    def with_epsilon(self, epsilon: float) -> "AttackConfig":
        return replace(self, epsilon=epsilon, step_size=None)

    def describe(self) -> str:
        if self.kind == "exact-quadratic":
            return f"exact(eps={self.epsilon:g})"
        return (
            f"{self.kind}-{self.steps}(eps={self.epsilon:g},"
            f" alpha={self.step_size:g}, init={self.init})"
        )
