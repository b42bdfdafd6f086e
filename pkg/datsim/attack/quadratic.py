"""Strongly concave quadratic inner problems with closed-form solutions.

phi(theta, delta) = (A theta)^T delta - (mu / 2) ||delta||^2 over the box
||delta||_inf <= epsilon. The gradient in theta, A^T delta, is linear in delta,
so the error an approximate maximizer causes in the outer gradient is exact
arithmetic rather than an estimate.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import numpy.typing as npt

from datsim.core.errors import InvalidArgument
from datsim.core.params import Vector

Matrix = npt.NDArray[np.float64]

# absorbs rounding in the comparison of two mathematically ordered quantities
_ROUNDING_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class QuadraticInnerSpec:
    coupling: Matrix
    theta: Vector
    mu: float
    epsilon: float

    def __post_init__(self):
        coupling = np.atleast_2d(np.asarray(self.coupling, dtype=np.float64))
        theta = np.asarray(self.theta, dtype=np.float64).reshape(-1)
        if coupling.shape[1] != theta.size:
            raise InvalidArgument(
                f"Coupling {coupling.shape} does not act on theta of size {theta.size}."
            )
        if not self.mu > 0:
            raise InvalidArgument(f"Strong concavity needs mu > 0, got {self.mu}.")
        if self.epsilon < 0:
            raise InvalidArgument(f"epsilon must be >= 0, got {self.epsilon}.")
        object.__setattr__(self, "coupling", coupling)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def from_linear_term(
        cls,
        g: npt.ArrayLike,
        mu: float,
        epsilon: float,
        cross_lipschitz: float = 1.0,
    ) -> "QuadraticInnerSpec":
        """Spec with the given linear term, using A = L_phi * I."""
        g_arr = np.asarray(g, dtype=np.float64).reshape(-1)
        if not cross_lipschitz > 0:
            raise InvalidArgument(
                f"cross_lipschitz must be positive, got {cross_lipschitz}."
            )
        return cls(
            cross_lipschitz * np.eye(g_arr.size), g_arr / cross_lipschitz, mu, epsilon
        )

    @classmethod
    def random(
        cls,
        rng: np.random.Generator,
        dim: int,
        theta_dim: int = 3,
        epsilon: float = 1.0,
    ) -> "QuadraticInnerSpec":
        return cls(
            rng.normal(size=(dim, theta_dim)),
            rng.normal(size=theta_dim),
            float(rng.uniform(0.1, 2.0)),
            epsilon,
        )

    @property
    def linear_term(self) -> Vector:
        return self.coupling @ self.theta

    @property
    def cross_lipschitz(self) -> float:
        return float(np.linalg.norm(self.coupling, 2))

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.coupling.shape[0],)

    def value(self, delta: npt.ArrayLike) -> npt.NDArray[np.float64]:
        d = np.asarray(delta, dtype=np.float64)
        return d @ self.linear_term - 0.5 * self.mu * np.sum(d * d, axis=-1)

    def delta_grad(self, delta: npt.ArrayLike) -> npt.NDArray[np.float64]:
        return self.linear_term - self.mu * np.asarray(delta, dtype=np.float64)

    def theta_grad(self, delta: npt.ArrayLike) -> npt.NDArray[np.float64]:
        return np.asarray(delta, dtype=np.float64) @ self.coupling

    def exact_max(self) -> Vector:
        return exact_quadratic_max(self)


def exact_quadratic_max(spec: QuadraticInnerSpec) -> Vector:
    """Constrained maximizer: componentwise clamp of g / mu into the box."""
    if not spec.mu > 0:
        raise InvalidArgument(f"Strong concavity needs mu > 0, got {spec.mu}.")
    return np.clip(spec.linear_term / spec.mu, -spec.epsilon, spec.epsilon)


@dataclass(frozen=True)
class GapReport:
    is_eps_approx: bool
    criterion: float
    tolerance: float
    theta_grad_gap: float
    bound_holds: bool


def approx_gap_check(
    spec: QuadraticInnerSpec, delta: npt.ArrayLike, eps_target: float
) -> GapReport:
    """Check an approximate maximizer against the outer-gradient error bound.

    ``delta`` qualifies when <delta* - delta, grad_delta phi(delta)> is at most
    mu * eps_target / L_phi^2; any qualifying point keeps the squared distance
    between the outer gradients at delta and at delta* within eps_target.
    """
    d = np.asarray(delta, dtype=np.float64).reshape(-1)
    optimum = exact_quadratic_max(spec)
    criterion = float(np.dot(optimum - d, spec.delta_grad(d)))
    lipschitz = spec.cross_lipschitz
    tolerance = (
        spec.mu * eps_target / lipschitz**2 if lipschitz > 0 else float("inf")
    )
    diff = spec.theta_grad(d) - spec.theta_grad(optimum)
    gap = float(np.dot(diff, diff))
    return GapReport(
        is_eps_approx=criterion <= tolerance,
        criterion=criterion,
        tolerance=tolerance,
        theta_grad_gap=gap,
        bound_holds=gap <= eps_target * (1.0 + _ROUNDING_SLACK),
    )
