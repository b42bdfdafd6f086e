"""Outer minimization oracles: LAMB with layerwise adaptive rates, momentum SGD."""

from .lamb import LalrConfig, LambState, lalr_step, lamb_direction, tau
from .outer import (
    LambLalr,
    OptimizerKind,
    OptimizerSnapshot,
    OuterOptimizer,
    SgdMomentum,
    make_optimizer,
)
from .schedule import LearningRateSchedule
from .sgd import SgdMomentumState, sgd_momentum_step
