"""LAMB moments and the layerwise adaptive learning rate update."""
from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np

from datsim.core.errors import InvalidArgument
from datsim.core.params import LayeredParams, Layout

from .schedule import LearningRateSchedule

DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_ZETA = 1e-6


@dataclass(frozen=True)
class LalrConfig:
    c_l: float = 0.0
    c_u: float = 10.0
    schedule: LearningRateSchedule = field(default_factory=LearningRateSchedule)

    def __post_init__(self):
        if not 0 <= self.c_l < self.c_u:
            raise InvalidArgument(
                "Clip bounds must satisfy 0 <= c_l < c_u,"
                f" got ({self.c_l}, {self.c_u})."
            )


def tau(norm: float, cfg: LalrConfig) -> float:
    """Layer scaling factor: the norm clipped into [c_l, c_u]."""
    if norm < 0:
        raise InvalidArgument(f"Norms are nonnegative, got {norm}.")
    return min(max(norm, cfg.c_l), cfg.c_u)


@dataclass(frozen=True)
class LambState:
    m: LayeredParams
    v: LayeredParams
    t: int = 0
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    zeta: float = DEFAULT_ZETA

    def __post_init__(self):
        self.m.check_layout(self.v)
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise InvalidArgument(
                f"Moment coefficients must lie in [0, 1): {self.beta1}, {self.beta2}."
            )
        if not self.zeta > 0:
            raise InvalidArgument(f"zeta must be positive, got {self.zeta}.")
        if self.t < 0:
            raise InvalidArgument(f"Step counter must be nonnegative, got {self.t}.")

    @classmethod
    def zeros(
        cls,
        layout: Layout,
        beta1: float = DEFAULT_BETA1,
        beta2: float = DEFAULT_BETA2,
        zeta: float = DEFAULT_ZETA,
    ) -> "LambState":
        zeros = LayeredParams.zeros(layout)
        return cls(zeros, zeros, 0, beta1, beta2, zeta)


def lamb_direction(
    state: LambState, g_hat: LayeredParams
) -> Tuple[LayeredParams, LambState]:
    """One moment update; returns the bias-corrected ratio m / (sqrt(v) + zeta)."""
    state.m.check_layout(g_hat)
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    m = state.m.zip_map(g_hat, lambda m_i, g_i: b1 * m_i + (1.0 - b1) * g_i)
    v = state.v.zip_map(g_hat, lambda v_i, g_i: b2 * v_i + (1.0 - b2) * g_i * g_i)
    m_scale = 1.0 / (1.0 - b1**t)
    v_scale = 1.0 / (1.0 - b2**t)
    u = m.zip_map(
        v,
        lambda m_i, v_i: (m_i * m_scale) / (np.sqrt(v_i * v_scale) + state.zeta),
    )
    return u, replace(state, m=m, v=v, t=t)


def lalr_step(
    theta: LayeredParams, u: LayeredParams, cfg: LalrConfig, t: int
) -> LayeredParams:
    """Move every layer by tau(||theta_i||) * eta_t along u_i / ||u_i||.

    Layers whose direction is zero are left unchanged.
    """
    theta.check_layout(u)
    eta = cfg.schedule.rate(t)
    layers = []
    for theta_i, u_i in zip(theta, u):
        u_norm = float(np.linalg.norm(u_i))
        if u_norm == 0.0:
            layers.append(theta_i)
            continue
        scale = tau(float(np.linalg.norm(theta_i)), cfg) * eta / u_norm
        layers.append(theta_i - scale * u_i)
    return LayeredParams(layers)
