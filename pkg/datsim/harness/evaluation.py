"""Standard and robust accuracy, and the first-order stationarity metric."""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from datsim.attack.config import AttackConfig
from datsim.attack.oracles import ClassifierInner, solve
from datsim.core import Tags
from datsim.core.errors import InvalidArgument
from datsim.core.params import LayeredParams
from datsim.core.rng import SERVER_ID, SeededRng
from datsim.data.dataset import Dataset
from datsim.models.zoo import ModelSpec, predict_batch
from datsim.runtime.objective import RobustObjective


@dataclass(frozen=True)
class EvalReport:
    ta: float
    ra: float
    fosp: Optional[float]
    per_class: Tuple[float, ...]
    attack: AttackConfig

    def __post_init__(self):
        assert 0.0 <= self.ta <= 1.0 and 0.0 <= self.ra <= 1.0


def _eval_stream(seed: int, round_: int = 0) -> SeededRng:
    return SeededRng.for_stream(seed, SERVER_ID, round_, Tags.EVAL)


def _check_nonempty(test: Dataset) -> None:
    if len(test) == 0:
        raise InvalidArgument("Cannot evaluate on an empty dataset.")


def eval_standard(spec: ModelSpec, theta: LayeredParams, test: Dataset) -> float:
    """Fraction of test samples whose prediction matches the label."""
    _check_nonempty(test)
    return float(np.mean(predict_batch(spec, theta, test.inputs) == test.labels))


def adversarial_inputs(
    spec: ModelSpec,
    theta: LayeredParams,
    test: Dataset,
    attack: AttackConfig,
    seed: int = 0,
    round_: int = 0,
) -> np.ndarray:
    # the inner problem is separable, so one batched attack is a per-sample attack
    inner = ClassifierInner(spec, theta, test.as_batch())
    return test.inputs + solve(inner, attack, _eval_stream(seed, round_))


def eval_robust(
    spec: ModelSpec,
    theta: LayeredParams,
    test: Dataset,
    attack: AttackConfig,
    seed: int = 0,
    round_: int = 0,
) -> float:
    """Fraction of test samples still classified correctly under the attack."""
    _check_nonempty(test)
    perturbed = adversarial_inputs(spec, theta, test, attack, seed, round_)
    return float(np.mean(predict_batch(spec, theta, perturbed) == test.labels))


def per_class_accuracy(
    spec: ModelSpec, theta: LayeredParams, test: Dataset
) -> Tuple[float, ...]:
    predictions = predict_batch(spec, theta, test.inputs)
    out = []
    for c in range(spec.class_count):
        mask = test.labels == c
        hits = np.mean(predictions[mask] == c) if mask.any() else np.nan
        out.append(float(hits))
    return tuple(out)


def fosp_metric(
    objective: RobustObjective,
    theta: LayeredParams,
    dataset: Dataset,
    attack: AttackConfig,
    lam: float,
    seed: int = 0,
) -> float:
    """Norm of the full-dataset robust gradient, estimating ||grad Psi(theta)||."""
    _check_nonempty(dataset)
    batch = dataset.as_batch()
    delta = solve(objective.inner_problem(theta, batch), attack, _eval_stream(seed))
    return objective.local_gradient(theta, batch, delta, lam).norm()


def evaluate(
    spec: ModelSpec,
    theta: LayeredParams,
    test: Dataset,
    attack: AttackConfig,
    seed: int = 0,
    fosp: Optional[float] = None,
    round_: int = 0,
) -> EvalReport:
    return EvalReport(
        ta=eval_standard(spec, theta, test),
        ra=eval_robust(spec, theta, test, attack, seed, round_),
        fosp=fosp,
        per_class=per_class_accuracy(spec, theta, test),
        attack=attack,
    )
