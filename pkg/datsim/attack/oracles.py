"""Projected sign-gradient inner maximization oracles."""
from typing import Optional, Protocol, Tuple, runtime_checkable

import numpy as np
import numpy.typing as npt

from datsim.core.errors import InvalidArgument
from datsim.core.numeric import check_finite, sign0
from datsim.core.params import LayeredParams
from datsim.core.registry import Registry
from datsim.core.rng import SeededRng
from datsim.models.zoo import LabeledBatch, ModelSpec, input_gradients

from .config import AttackConfig

Array = npt.NDArray[np.float64]


@runtime_checkable
class InnerProblem(Protocol):
    """Anything exposing the gradient of phi with respect to the perturbation."""

    @property
    def shape(self) -> Tuple[int, ...]:
        ...

    def delta_grad(self, delta: Array) -> Array:
        ...


@runtime_checkable
class ExactInnerProblem(InnerProblem, Protocol):
    def exact_max(self) -> Array:
        ...


class ClassifierInner:
    """Cross-entropy of a classifier at perturbed inputs; one row per sample."""

    def __init__(self, spec: ModelSpec, theta: LayeredParams, batch: LabeledBatch):
        batch.check(spec)
        self.spec = spec
        self.theta = theta
        self.batch = batch

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.batch.inputs.shape

    def delta_grad(self, delta: Array) -> Array:
        perturbed = self.batch.with_inputs(self.batch.inputs + delta)
        return input_gradients(self.spec, self.theta, perturbed)


def initial_delta(
    shape: Tuple[int, ...], cfg: AttackConfig, rng: Optional[SeededRng]
) -> Array:
    if cfg.init == "zero" or cfg.epsilon == 0:
        return np.zeros(shape)
    if rng is None:
        raise InvalidArgument("Random attack initialisation needs a random stream.")
    return rng.generator().uniform(-cfg.epsilon, cfg.epsilon, size=shape)


def _signed_ascent(
    problem: InnerProblem, cfg: AttackConfig, steps: int, rng: Optional[SeededRng]
) -> Array:
    eps = cfg.epsilon
    z = initial_delta(problem.shape, cfg, rng)
    for _ in range(steps):
        grad = problem.delta_grad(z)
        check_finite("perturbation gradient", grad)
        z = np.clip(z + cfg.step_size * sign0(grad), -eps, eps)
    return z


oracles: Registry = Registry("inner oracle")


@oracles.register()
def fgsm(
    problem: InnerProblem, cfg: AttackConfig, rng: Optional[SeededRng] = None
) -> Array:
    """One projected signed-gradient step from the configured initialisation."""
    if cfg.kind != "fgsm":
        raise InvalidArgument(f"fgsm called with a {cfg.kind} configuration.")
    return _signed_ascent(problem, cfg, 1, rng)


@oracles.register()
def pgd(
    problem: InnerProblem, cfg: AttackConfig, rng: Optional[SeededRng] = None
) -> Array:
    """K projected signed-gradient ascent steps on the l-infinity ball."""
    if cfg.kind != "pgd":
        raise InvalidArgument(f"pgd called with a {cfg.kind} configuration.")
    assert cfg.steps is not None
    return _signed_ascent(problem, cfg, cfg.steps, rng)


@oracles.register("exact-quadratic")
def exact(
    problem: InnerProblem, cfg: AttackConfig, rng: Optional[SeededRng] = None
) -> Array:
    """Closed-form maximizer, available for the strongly concave quadratic toys."""
    if not isinstance(problem, ExactInnerProblem):
        raise InvalidArgument(
            f"{type(problem).__name__} has no closed-form inner maximizer."
        )
    delta = np.asarray(problem.exact_max(), dtype=np.float64)
    return np.clip(delta, -cfg.epsilon, cfg.epsilon)


def solve(
    problem: InnerProblem, cfg: AttackConfig, rng: Optional[SeededRng] = None
) -> Array:
    """Run the oracle named by ``cfg.kind``."""
    return oracles[cfg.kind].run(problem, cfg, rng)
