"""Robust training objectives: the clean loss l and the perturbed loss phi.

Each worker minimizes lam * l(theta; x) + phi(theta; x + delta(x)) averaged over
its batch, where delta(x) comes from the inner maximization oracle.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Tuple

import numpy as np
import numpy.typing as npt

from datsim.attack.oracles import ClassifierInner, InnerProblem
from datsim.core.errors import InvalidArgument
from datsim.core.params import LayeredParams, Layout, Vector
from datsim.models import zoo
from datsim.models.zoo import LabeledBatch, ModelSpec

Matrix = npt.NDArray[np.float64]


class RobustObjective(ABC):
    name: str

    @property
    @abstractmethod
    def layout(self) -> Layout:
        ...

    @abstractmethod
    def clean_loss(self, theta: LayeredParams, batch: LabeledBatch) -> float:
        ...

    @abstractmethod
    def perturbed_loss(
        self, theta: LayeredParams, batch: LabeledBatch, delta: Matrix
    ) -> float:
        ...

    @abstractmethod
    def clean_grad(self, theta: LayeredParams, batch: LabeledBatch) -> LayeredParams:
        ...

    @abstractmethod
    def perturbed_grad(
        self, theta: LayeredParams, batch: LabeledBatch, delta: Matrix
    ) -> LayeredParams:
        ...

    @abstractmethod
    def inner_problem(self, theta: LayeredParams, batch: LabeledBatch) -> InnerProblem:
        ...

    def local_gradient(
        self, theta: LayeredParams, batch: LabeledBatch, delta: Matrix, lam: float
    ) -> LayeredParams:
        grad = self.perturbed_grad(theta, batch, delta)
        if lam:
            grad = self.clean_grad(theta, batch) * lam + grad
        return grad

    def local_loss(
        self, theta: LayeredParams, batch: LabeledBatch, delta: Matrix, lam: float
    ) -> float:
        value = self.perturbed_loss(theta, batch, delta)
        if lam:
            value += lam * self.clean_loss(theta, batch)
        return value


class ClassifierObjective(RobustObjective):
    """phi is the cross-entropy at the perturbed input, on true or pseudo labels."""

    name = "classifier"

    def __init__(self, spec: ModelSpec):
        self.spec = spec

    @property
    def layout(self) -> Layout:
        return self.spec.layout

    def clean_loss(self, theta: LayeredParams, batch: LabeledBatch) -> float:
        return zoo.loss(self.spec, theta, batch)

    def perturbed_loss(
        self, theta: LayeredParams, batch: LabeledBatch, delta: Matrix
    ) -> float:
        return zoo.loss(self.spec, theta, batch.with_inputs(batch.inputs + delta))

    def clean_grad(self, theta: LayeredParams, batch: LabeledBatch) -> LayeredParams:
        return zoo.grad_theta(self.spec, theta, batch)

    def perturbed_grad(
        self, theta: LayeredParams, batch: LabeledBatch, delta: Matrix
    ) -> LayeredParams:
        return zoo.grad_theta(
            self.spec, theta, batch.with_inputs(batch.inputs + delta)
        )

    def inner_problem(self, theta: LayeredParams, batch: LabeledBatch) -> InnerProblem:
        return ClassifierInner(self.spec, theta, batch)


class _GameInner:
    def __init__(self, game: "QuadraticGame", theta: Vector, rows: int):
        self.linear = game.coupling @ theta
        self.mu = game.mu
        self.rows = rows

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.rows, self.linear.size)

    def delta_grad(self, delta: Matrix) -> Matrix:
        return self.linear - self.mu * np.asarray(delta, dtype=np.float64)

    def exact_max(self) -> Matrix:
        # unconstrained maximizer; the oracle clamps it into the box
        return np.tile(self.linear / self.mu, (self.rows, 1))


class QuadraticGame(RobustObjective):
    """Toy min-max problem with a closed-form inner maximizer.

    phi(theta, delta; x) = 1/2 ||theta - x||^2 + (A theta)^T delta - mu/2 ||delta||^2
    and l(theta; x) = 1/2 ||theta - x||^2. Samples are the rows of the batch
    inputs; labels are ignored.
    """

    name = "quadratic-game"

    def __init__(self, coupling: npt.ArrayLike, mu: float):
        coupling_arr = np.atleast_2d(np.asarray(coupling, dtype=np.float64))
        if not mu > 0:
            raise InvalidArgument(f"Strong concavity needs mu > 0, got {mu}.")
        self.coupling = coupling_arr
        self.mu = float(mu)

    @property
    def theta_dim(self) -> int:
        return int(self.coupling.shape[1])

    @property
    def delta_dim(self) -> int:
        return int(self.coupling.shape[0])

    @property
    def layout(self) -> Layout:
        return (self.theta_dim,)

    def _residuals(self, theta: LayeredParams, batch: LabeledBatch) -> Matrix:
        if theta.layout != self.layout:
            raise InvalidArgument(f"Expected layout {self.layout}, got {theta.layout}.")
        return theta[0] - batch.inputs

    def clean_loss(self, theta: LayeredParams, batch: LabeledBatch) -> float:
        res = self._residuals(theta, batch)
        return float(0.5 * np.mean(np.sum(res * res, axis=1)))

    def perturbed_loss(
        self, theta: LayeredParams, batch: LabeledBatch, delta: Matrix
    ) -> float:
        d = np.asarray(delta, dtype=np.float64)
        coupling_term = d @ (self.coupling @ theta[0])
        return self.clean_loss(theta, batch) + float(
            np.mean(coupling_term - 0.5 * self.mu * np.sum(d * d, axis=1))
        )

    def clean_grad(self, theta: LayeredParams, batch: LabeledBatch) -> LayeredParams:
        return LayeredParams([self._residuals(theta, batch).mean(axis=0)])

    def perturbed_grad(
        self, theta: LayeredParams, batch: LabeledBatch, delta: Matrix
    ) -> LayeredParams:
        d = np.asarray(delta, dtype=np.float64)
        per_sample = self._residuals(theta, batch) + d @ self.coupling
        return LayeredParams([per_sample.mean(axis=0)])

    def inner_problem(self, theta: LayeredParams, batch: LabeledBatch) -> InnerProblem:
        self._residuals(theta, batch)
        return _GameInner(self, theta[0], len(batch))

    def saddle_point(self, inputs: npt.ArrayLike, lam: float) -> LayeredParams:
        """Stationary point of the robust objective, valid while the box is inactive."""
        x_bar = np.atleast_2d(np.asarray(inputs, dtype=np.float64)).mean(axis=0)
        scale = 1.0 + lam
        gram = self.coupling.T @ self.coupling
        system = scale * np.eye(self.theta_dim) + gram / self.mu
        return LayeredParams([np.linalg.solve(system, scale * x_bar)])

    def box_inactive(self, theta: LayeredParams, epsilon: float) -> bool:
        return bool(np.max(np.abs(self.coupling @ theta[0])) / self.mu <= epsilon)

    @classmethod
    def random(
        cls,
        rng: np.random.Generator,
        theta_dim: int,
        delta_dim: int,
        coupling_norm: float = 0.5,
        mu: float = 1.0,
    ) -> "QuadraticGame":
        coupling = rng.normal(size=(delta_dim, theta_dim))
        coupling *= coupling_norm / np.linalg.norm(coupling, 2)
        return cls(coupling, mu)
