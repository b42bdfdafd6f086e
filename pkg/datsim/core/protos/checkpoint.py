# Checkpoint container messages. Field numbers are part of the file format.
from dataclasses import dataclass
from typing import List

import betterproto


@dataclass(eq=False, repr=False)
class Layer(betterproto.Message):
    values: List[float] = betterproto.double_field(1)


@dataclass(eq=False, repr=False)
class Params(betterproto.Message):
    layers: List["Layer"] = betterproto.message_field(1)


@dataclass(eq=False, repr=False)
class NamedParams(betterproto.Message):
    name: str = betterproto.string_field(1)
    params: "Params" = betterproto.message_field(2)


@dataclass(eq=False, repr=False)
class OptimizerState(betterproto.Message):
    kind: str = betterproto.string_field(1)
    step: int = betterproto.int64_field(2)
    tensors: List["NamedParams"] = betterproto.message_field(3)


@dataclass(eq=False, repr=False)
class Model(betterproto.Message):
    objective: str = betterproto.string_field(1)
    input_dim: int = betterproto.int32_field(2)
    class_count: int = betterproto.int32_field(3)
    hidden: List[int] = betterproto.int32_field(4)
    activation: str = betterproto.string_field(5)


@dataclass(eq=False, repr=False)
class Checkpoint(betterproto.Message):
    version: int = betterproto.uint32_field(1)
    model: "Model" = betterproto.message_field(2)
    theta: "Params" = betterproto.message_field(3)
    optimizer: "OptimizerState" = betterproto.message_field(4)
    round: int = betterproto.int64_field(5)
    seed: int = betterproto.uint64_field(6)
    diagnostic: bool = betterproto.bool_field(7)
