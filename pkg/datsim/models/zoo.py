"""Small softmax classifiers with hand-derived gradients.

Every linear map contributes two layers to the induced ``LayeredParams``: the
weight matrix (row-major, shape ``out x in``) followed by the bias vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Literal, Tuple

import numpy as np
import numpy.typing as npt

from datsim.core.errors import InvalidArgument
from datsim.core.params import LayeredParams, Layout, Vector

Activation = Literal["relu", "tanh"]
Matrix = npt.NDArray[np.float64]


@dataclass(frozen=True)
class ModelSpec:
    input_dim: int
    class_count: int
    hidden: Tuple[int, ...] = ()
    activation: Activation = "relu"

    def __post_init__(self):
        if self.input_dim < 1:
            raise InvalidArgument(f"input_dim must be positive, got {self.input_dim}.")
        if self.class_count < 2:
            raise InvalidArgument(
                f"class_count must be at least 2, got {self.class_count}."
            )
        if any(h < 1 for h in self.hidden):
            raise InvalidArgument(f"Hidden sizes must be positive: {self.hidden}.")
        if self.activation not in ("relu", "tanh"):
            raise InvalidArgument(f"Unknown activation {self.activation!r}.")
        object.__setattr__(self, "hidden", tuple(self.hidden))

    @classmethod
    def linear(cls, input_dim: int, class_count: int) -> "ModelSpec":
        return cls(input_dim, class_count)

    @classmethod
    def mlp(
        cls,
        input_dim: int,
        class_count: int,
        hidden: Tuple[int, ...],
        activation: Activation = "relu",
    ) -> "ModelSpec":
        if not hidden:
            raise InvalidArgument("An mlp needs at least one hidden layer.")
        return cls(input_dim, class_count, tuple(hidden), activation)

    @property
    def architecture(self) -> str:
        return "mlp" if self.hidden else "linear-softmax"

    @property
    def widths(self) -> Tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.class_count)

    @property
    def layout(self) -> Layout:
        sizes = self.widths
        return tuple(
            d
            for fan_in, fan_out in zip(sizes[:-1], sizes[1:])
            for d in (fan_out * fan_in, fan_out)
        )

    def check(self, theta: LayeredParams) -> None:
        if theta.layout != self.layout:
            raise InvalidArgument(
                f"Parameter layout {theta.layout} does not match"
                f" {self.architecture} layout {self.layout}."
            )


@dataclass(frozen=True, eq=False)
class LabeledBatch:
    inputs: Matrix
    labels: npt.NDArray[np.int64]
    is_pseudo: npt.NDArray[np.bool_] = field(default=None)  # type: ignore

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        pseudo = (
            np.zeros(labels.shape, dtype=bool)
            if self.is_pseudo is None
            else np.asarray(self.is_pseudo, dtype=bool).reshape(-1)
        )
        if inputs.shape[0] != labels.size or labels.size != pseudo.size:
            raise InvalidArgument(
                f"Batch has {inputs.shape[0]} inputs, {labels.size} labels"
                f" and {pseudo.size} pseudo flags."
            )
        if labels.size == 0:
            raise InvalidArgument("Batches must be nonempty.")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "is_pseudo", pseudo)

    def __len__(self) -> int:
        return int(self.labels.size)

    def with_inputs(self, inputs: Matrix) -> "LabeledBatch":
        return LabeledBatch(inputs, self.labels, self.is_pseudo)

    def check(self, spec: ModelSpec) -> None:
        if self.inputs.shape[1] != spec.input_dim:
            raise InvalidArgument(
                f"Inputs have dimension {self.inputs.shape[1]},"
                f" model expects {spec.input_dim}."
            )
        if self.labels.min() < 0 or self.labels.max() >= spec.class_count:
            raise InvalidArgument(
                f"Labels must lie in [0, {spec.class_count}),"
                f" got range [{self.labels.min()}, {self.labels.max()}]."
            )


def _unpack(spec: ModelSpec, theta: LayeredParams) -> List[Tuple[Matrix, Vector]]:
    spec.check(theta)
    sizes = spec.widths
    return [
        (theta[2 * k].reshape(fan_out, fan_in), theta[2 * k + 1])
        for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:]))
    ]


def _activate(spec: ModelSpec, z: Matrix) -> Matrix:
    if spec.activation == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activation_grad(spec: ModelSpec, z: Matrix) -> Matrix:
    if spec.activation == "relu":
        # subgradient at the kink is 0
        return (z > 0.0).astype(np.float64)
    return 1.0 - np.tanh(z) ** 2


def _forward(
    spec: ModelSpec, maps: List[Tuple[Matrix, Vector]], inputs: Matrix
) -> Tuple[List[Matrix], List[Matrix]]:
    """Returns pre-activations and activations (activations[0] is the input)."""
    activations = [inputs]
    pre = []
    for k, (weight, bias) in enumerate(maps):
        z = activations[-1] @ weight.T + bias
        pre.append(z)
        if k < len(maps) - 1:
            activations.append(_activate(spec, z))
    return pre, activations


def _log_softmax(logits_: Matrix) -> Matrix:
    shifted = logits_ - logits_.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _inputs_of(spec: ModelSpec, x: npt.ArrayLike) -> Matrix:
    inputs = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if inputs.shape[1] != spec.input_dim:
        raise InvalidArgument(
            f"Inputs have dimension {inputs.shape[1]}, model expects {spec.input_dim}."
        )
    return inputs


def logits(spec: ModelSpec, theta: LayeredParams, x: npt.ArrayLike) -> Matrix:
    pre, _ = _forward(spec, _unpack(spec, theta), _inputs_of(spec, x))
    return pre[-1]


def probabilities(spec: ModelSpec, theta: LayeredParams, x: npt.ArrayLike) -> Matrix:
    return np.exp(_log_softmax(logits(spec, theta, x)))


def per_sample_loss(
    spec: ModelSpec, theta: LayeredParams, batch: LabeledBatch
) -> Vector:
    batch.check(spec)
    log_probs = _log_softmax(logits(spec, theta, batch.inputs))
    return -log_probs[np.arange(len(batch)), batch.labels]


def loss(spec: ModelSpec, theta: LayeredParams, batch: LabeledBatch) -> float:
    """Mean softmax cross-entropy over the batch."""
    return float(per_sample_loss(spec, theta, batch).mean())


def _backward(
    spec: ModelSpec, theta: LayeredParams, batch: LabeledBatch, mean: bool
) -> Tuple[LayeredParams, Matrix]:
    batch.check(spec)
    maps = _unpack(spec, theta)
    pre, activations = _forward(spec, maps, batch.inputs)
    delta = np.exp(_log_softmax(pre[-1]))
    delta[np.arange(len(batch)), batch.labels] -= 1.0
    if mean:
        delta /= len(batch)
    grads: List[Vector] = []
    for k in range(len(maps) - 1, -1, -1):
        weight, _ = maps[k]
        grads.append(delta.sum(axis=0))
        grads.append((delta.T @ activations[k]).reshape(-1))
        delta = delta @ weight
        if k > 0:
            delta = delta * _activation_grad(spec, pre[k - 1])
    return LayeredParams(reversed(grads)), delta


def grad_theta(
    spec: ModelSpec, theta: LayeredParams, batch: LabeledBatch
) -> LayeredParams:
    """Gradient of the mean cross-entropy with respect to the parameters."""
    grads, _ = _backward(spec, theta, batch, mean=True)
    return grads


def per_sample_grad_theta(
    spec: ModelSpec, theta: LayeredParams, batch: LabeledBatch
) -> List[LayeredParams]:
    return [
        grad_theta(
            spec,
            theta,
            LabeledBatch(
                batch.inputs[i : i + 1],
                batch.labels[i : i + 1],
                batch.is_pseudo[i : i + 1],
            ),
        )
        for i in range(len(batch))
    ]


def input_gradients(
    spec: ModelSpec, theta: LayeredParams, batch: LabeledBatch
) -> Matrix:
    """Row i is the gradient of sample i's own loss with respect to its input."""
    _, delta = _backward(spec, theta, batch, mean=False)
    return delta


def grad_input(
    spec: ModelSpec, theta: LayeredParams, x: npt.ArrayLike, y: int
) -> Vector:
    inputs = _inputs_of(spec, x)
    if inputs.shape[0] != 1:
        raise InvalidArgument("grad_input expects a single sample.")
    return input_gradients(spec, theta, LabeledBatch(inputs, [y]))[0]


def predict_batch(
    spec: ModelSpec, theta: LayeredParams, x: npt.ArrayLike
) -> npt.NDArray[np.int64]:
    # argmax returns the first maximum, so ties go to the smallest class index
    return np.argmax(logits(spec, theta, x), axis=1)


def predict(spec: ModelSpec, theta: LayeredParams, x: npt.ArrayLike) -> int:
    inputs = _inputs_of(spec, x)
    if inputs.shape[0] != 1:
        raise InvalidArgument("predict expects a single sample.")
    return int(predict_batch(spec, theta, inputs)[0])


def init_params(
    spec: ModelSpec, rng: np.random.Generator, scale: float = 1.0
) -> LayeredParams:
    """Glorot-uniform weights and zero biases."""
    layers = []
    sizes = spec.widths
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = scale * np.sqrt(6.0 / (fan_in + fan_out))
        layers.append(rng.uniform(-limit, limit, size=fan_out * fan_in))
        layers.append(np.zeros(fan_out))
    return LayeredParams(layers)
