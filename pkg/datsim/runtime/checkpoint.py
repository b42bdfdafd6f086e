"""Versioned binary checkpoints of a training run."""
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union, cast

import datsim.core.protos.checkpoint as pc
from datsim.core.params import LayeredParams
from datsim.models.zoo import Activation, ModelSpec
from datsim.optim.outer import OptimizerKind, OptimizerSnapshot

from .errors import CheckpointError

CHECKPOINT_VERSION = 1


@dataclass
class CheckpointData:
    theta: LayeredParams
    round_: int
    seed: int
    objective: str
    model: Optional[ModelSpec] = None
    optimizer: Optional[OptimizerSnapshot] = None
    diagnostic: bool = False


def _params_to_proto(params: LayeredParams) -> pc.Params:
    return pc.Params(layers=[pc.Layer(values=layer.tolist()) for layer in params])


def _params_from_proto(msg: pc.Params) -> LayeredParams:
    return LayeredParams(layer.values for layer in msg.layers)


def to_proto(data: CheckpointData) -> pc.Checkpoint:
    model = pc.Model(objective=data.objective)
    if data.model is not None:
        model.input_dim = data.model.input_dim
        model.class_count = data.model.class_count
        model.hidden = list(data.model.hidden)
        model.activation = data.model.activation
    msg = pc.Checkpoint(
        version=CHECKPOINT_VERSION,
        model=model,
        theta=_params_to_proto(data.theta),
        round=data.round_,
        seed=data.seed,
        diagnostic=data.diagnostic,
    )
    if data.optimizer is not None:
        msg.optimizer = pc.OptimizerState(
            kind=data.optimizer.kind,
            step=data.optimizer.step,
            tensors=[
                pc.NamedParams(name=name, params=_params_to_proto(params))
                for name, params in sorted(data.optimizer.tensors.items())
            ],
        )
    return msg


def from_proto(msg: pc.Checkpoint) -> CheckpointData:
    if msg.version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"Unsupported checkpoint version {msg.version},"
            f" expected {CHECKPOINT_VERSION}."
        )
    model = None
    if msg.model.input_dim:
        model = ModelSpec(
            msg.model.input_dim,
            msg.model.class_count,
            tuple(msg.model.hidden),
            cast(Activation, msg.model.activation),
        )
    optimizer = None
    if msg.optimizer.kind:
        optimizer = OptimizerSnapshot(
            cast(OptimizerKind, msg.optimizer.kind),
            msg.optimizer.step,
            {t.name: _params_from_proto(t.params) for t in msg.optimizer.tensors},
        )
    return CheckpointData(
        theta=_params_from_proto(msg.theta),
        round_=msg.round,
        seed=msg.seed,
        objective=msg.model.objective,
        model=model,
        optimizer=optimizer,
        diagnostic=msg.diagnostic,
    )


def save_checkpoint(path: Union[str, Path], data: CheckpointData) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(bytes(to_proto(data)))


def load_checkpoint(path: Union[str, Path]) -> CheckpointData:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e
    try:
        msg = pc.Checkpoint().parse(raw)
    except Exception as e:  # pylint: disable=broad-except
        raise CheckpointError(f"Corrupt checkpoint {path}: {e}") from e
    try:
        return from_proto(msg)
    except ValueError as e:
        raise CheckpointError(f"Invalid checkpoint {path}: {e}") from e
