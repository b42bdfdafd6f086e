"""Inner maximization oracles and checks of approximate inner solutions."""

from .config import AttackConfig
from .oracles import (
    ClassifierInner,
    ExactInnerProblem,
    InnerProblem,
    exact,
    fgsm,
    oracles,
    pgd,
    solve,
)
from .quadratic import (
    GapReport,
    QuadraticInnerSpec,
    approx_gap_check,
    exact_quadratic_max,
)
