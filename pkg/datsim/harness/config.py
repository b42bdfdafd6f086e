"""Experiment configuration: one JSON document decoded into frozen dataclasses.

Decoding is driven by the dataclass type hints. Unknown keys and missing
required keys are errors naming the dotted field path and the line of the
JSON object they occur in.
"""
import json
import json.decoder
import json.scanner
import math
import os
import typing
from dataclasses import MISSING, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union, cast

from datsim.attack.config import DEFAULT_EVAL_STEPS, AttackConfig
from datsim.compress.quantizer import QuantizerConfig
from datsim.core.errors import DatsimError
from datsim.models.zoo import Activation
from datsim.optim.outer import OptimizerKind
from datsim.optim.schedule import LearningRateSchedule
from datsim.runtime.config import DEFAULT_PSEUDO_FRACTION, ClusterConfig, Topology

OUTPUT_DIR_ENV = "DATSIM_OUTPUT_DIR"

T = typing.TypeVar("T")


@dataclass
class ConfigError(DatsimError):
    path: str
    line: Optional[int]
    reason: str

    def __str__(self) -> str:
        where = f" (line {self.line})" if self.line is not None else ""
        return f"{self.path or '<root>'}{where}: {self.reason}"


@dataclass
class ConfigErrors(DatsimError):
    errors: list[ConfigError]

    def __str__(self) -> str:
        return "\n".join(map(str, self.errors))

    def __getitem__(self, index: int) -> ConfigError:
        return self.errors[index]

    def __len__(self) -> int:
        return len(self.errors)


def _require(ok: bool, path: str, reason: str) -> None:
    """Raise a ConfigError relative to the section being constructed."""
    if not ok:
        raise ConfigError(path, None, reason)


@dataclass(frozen=True)
class ModelSection:
    hidden: Tuple[int, ...] = ()
    activation: Activation = "relu"
    init_scale: float = 1.0


@dataclass(frozen=True)
class GameSection:
    """Train the quadratic min-max game on unlabeled points instead of a classifier."""

    delta_dim: int = 2
    coupling_norm: float = 0.5
    mu: float = 1.0
    seed: int = 0

    def __post_init__(self):
        _require(self.delta_dim >= 1, "delta_dim", "must be positive")
        _require(self.mu > 0, "mu", "must be positive")
        _require(self.seed >= 0, "seed", "must be nonnegative")


@dataclass(frozen=True)
class DatasetSection:
    generator: Literal["gaussian-mixture", "two-moons", "points"] = "gaussian-mixture"
    seed: int = 0
    classes: int = 2
    dim: int = 2
    per_class: int = 100
    separation: float = 4.0
    noise: float = 1.0
    count: int = 200
    test_fraction: float = 0.25
    noisy_copies: int = 1
    copy_sigma: float = 0.0
    unlabeled: int = 0
    base_checkpoint: Optional[str] = None

    def __post_init__(self):
        _require(self.seed >= 0, "seed", "must be nonnegative")
        _require(0 < self.test_fraction < 1, "test_fraction", "must lie in (0, 1)")
        _require(self.noisy_copies >= 1, "noisy_copies", "must be at least 1")
        _require(self.copy_sigma >= 0, "copy_sigma", "must be nonnegative")
        _require(self.unlabeled >= 0, "unlabeled", "must be nonnegative")


@dataclass(frozen=True)
class ClusterSection:
    workers: int = 1
    per_worker_batch: int = 32
    topology: Topology = "parameter-server"
    quantizer: QuantizerConfig = field(default_factory=QuantizerConfig)
    lam: float = 0.0
    seed: int = 0
    pseudo_fraction: float = DEFAULT_PSEUDO_FRACTION
    parallel: bool = True

    def __post_init__(self):
        _require(self.workers >= 1, "workers", "need at least one worker")
        _require(self.per_worker_batch >= 1, "per_worker_batch", "must be positive")
        _require(
            self.topology != "all-reduce" or self.quantizer.mode != "two-sided",
            "quantizer.mode",
            "all-reduce has no server broadcast to quantize; use one-sided",
        )
        _require(self.lam >= 0, "lam", "must be nonnegative")
        _require(self.seed >= 0, "seed", "must be nonnegative")
        _require(
            0 <= self.pseudo_fraction <= 1, "pseudo_fraction", "must lie in [0, 1]"
        )


@dataclass(frozen=True)
class OptimizerSection:
    kind: OptimizerKind = "lamb-lalr"
    lr: float = 0.01
    decay_fractions: Tuple[float, ...] = ()
    warmup_epochs: float = 0.0
    weight_decay: float = 1e-4
    momentum: float = 0.9
    c_l: float = 0.0
    c_u: float = 10.0

    def __post_init__(self):
        _require(self.lr > 0, "lr", "must be positive")
        _require(
            all(0 < f < 1 for f in self.decay_fractions),
            "decay_fractions",
            "must lie in (0, 1)",
        )
        _require(self.warmup_epochs >= 0, "warmup_epochs", "must be nonnegative")
        _require(self.weight_decay >= 0, "weight_decay", "must be nonnegative")
        _require(0 <= self.momentum < 1, "momentum", "must lie in [0, 1)")
        _require(self.c_l >= 0, "c_l", "must be nonnegative")
        _require(self.c_l < self.c_u, "c_u", f"must exceed c_l = {self.c_l}")


@dataclass(frozen=True)
class OutputSection:
    directory: str = "runs"
    record_wall_clock: bool = False
    checkpoint: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    dataset: DatasetSection
    train_attack: AttackConfig
    epochs: float = 1.0
    rounds: Optional[int] = None
    model: ModelSection = field(default_factory=ModelSection)
    game: Optional[GameSection] = None
    cluster: ClusterSection = field(default_factory=ClusterSection)
    eval_attack: Optional[AttackConfig] = None
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    eval_every: int = 0
    output: OutputSection = field(default_factory=OutputSection)

    def __post_init__(self):
        _require(self.epochs >= 0, "epochs", "must be nonnegative")
        _require(
            self.rounds is None or self.rounds >= 0, "rounds", "must be nonnegative"
        )
        _require(self.eval_every >= 0, "eval_every", "must be nonnegative")

    def eval_attack_config(self) -> AttackConfig:
        """The evaluation attack; PGD-20 at the training radius unless given."""
        if self.eval_attack is not None:
            return self.eval_attack
        return AttackConfig.pgd(self.train_attack.epsilon, DEFAULT_EVAL_STEPS)

    def total_rounds(self, train_size: int) -> int:
        if self.rounds is not None:
            return self.rounds
        global_batch = self.cluster.workers * self.cluster.per_worker_batch
        return int(math.ceil(self.epochs * train_size / global_batch))

    def rounds_per_epoch(self, train_size: int) -> float:
        return train_size / (self.cluster.workers * self.cluster.per_worker_batch)

    def cluster_config(self, train_size: int) -> ClusterConfig:
        c = self.cluster
        return ClusterConfig(
            workers=c.workers,
            per_worker_batch=c.per_worker_batch,
            topology=c.topology,
            quantizer=c.quantizer,
            attack=self.train_attack,
            lam=c.lam,
            rounds=self.total_rounds(train_size),
            seed=c.seed,
            pseudo_fraction=c.pseudo_fraction,
            parallel=c.parallel,
        )

    def schedule(self, train_size: int) -> LearningRateSchedule:
        per_epoch = self.rounds_per_epoch(train_size)
        return LearningRateSchedule(
            base=self.optimizer.lr,
            decay_fractions=self.optimizer.decay_fractions,
            total_rounds=self.total_rounds(train_size),
            warmup_rounds=int(math.ceil(self.optimizer.warmup_epochs * per_epoch)),
        )

    def output_dir(self) -> Path:
        base = os.environ.get(OUTPUT_DIR_ENV, self.output.directory)
        return Path(base) / self.name


class _Located(dict):
    """A decoded JSON object remembering the line it started on."""

    line: Optional[int] = None


def _parse_object(s_and_end, *args, **kwargs):
    s, end = s_and_end
    obj, new_end = json.decoder.JSONObject(s_and_end, *args, **kwargs)
    located = _Located(obj)
    located.line = s.count("\n", 0, end) + 1
    return located, new_end


def _located_loads(text: str) -> Any:
    decoder = json.JSONDecoder()
    decoder.parse_object = _parse_object  # type: ignore
    # the C scanner ignores parse_object
    decoder.scan_once = json.scanner.py_make_scanner(decoder)  # type: ignore
    return decoder.decode(text)


def _join(path: str, key: Union[str, int]) -> str:
    if isinstance(key, int):
        return f"{path}[{key}]"
    return f"{path}.{key}" if path else key


class _Decoder:
    def __init__(self):
        self.errors: List[ConfigError] = []

    def fail(self, path: str, line: Optional[int], reason: str) -> None:
        self.errors.append(ConfigError(path, line, reason))

    def decode(self, value: Any, type_: Any, path: str, line: Optional[int]) -> Any:
        origin = typing.get_origin(type_)
        args = typing.get_args(type_)
        if origin is Union:
            inner = [a for a in args if a is not type(None)]
            if value is None and len(inner) < len(args):
                return None
            return self.decode(value, inner[0], path, line)
        if origin is Literal:
            if value not in args:
                choices = ", ".join(map(repr, args))
                self.fail(path, line, f"expected one of {choices}, got {value!r}")
            return value
        if origin in (tuple, list):
            if not isinstance(value, list):
                self.fail(path, line, f"expected a list, got {type(value).__name__}")
                return None
            item_type = args[0] if args else Any
            items = [
                self.decode(v, item_type, _join(path, i), line)
                for i, v in enumerate(value)
            ]
            return tuple(items) if origin is tuple else items
        if is_dataclass(type_):
            return self.decode_struct(value, cast(type, type_), path, line)
        if type_ is bool:
            if not isinstance(value, bool):
                self.fail(path, line, f"expected true or false, got {value!r}")
            return value
        if type_ is int:
            if isinstance(value, bool) or not isinstance(value, int):
                self.fail(path, line, f"expected an integer, got {value!r}")
            return value
        if type_ is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                self.fail(path, line, f"expected a number, got {value!r}")
                return value
            return float(value)
        if type_ is str:
            if not isinstance(value, str):
                self.fail(path, line, f"expected a string, got {value!r}")
            return value
        return value

    def decode_struct(
        self, value: Any, cls: type, path: str, line: Optional[int]
    ) -> Any:
        if not isinstance(value, dict):
            self.fail(path, line, f"expected an object, got {type(value).__name__}")
            return None
        line = getattr(value, "line", line)
        hints = typing.get_type_hints(cls)
        known = {f.name: f for f in fields(cls)}
        errors_before = len(self.errors)
        for key in value:
            if key not in known:
                self.fail(_join(path, key), line, "unknown field")
        kwargs: Dict[str, Any] = {}
        for name, f in known.items():
            if name in value:
                kwargs[name] = self.decode(
                    value[name], hints[name], _join(path, name), line
                )
            elif f.default is MISSING and f.default_factory is MISSING:
                self.fail(_join(path, name), line, "missing required field")
        if len(self.errors) > errors_before:
            return None
        try:
            return cls(**kwargs)
        except ConfigError as e:
            self.fail(_join(path, e.path), line, e.reason)
            return None
        except (ValueError, TypeError) as e:
            self.fail(path, line, str(e))
            return None


def parse_config(
    text: str, type_: typing.Type[T] = ExperimentConfig  # type: ignore
) -> T:
    try:
        data = _located_loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("", e.lineno, f"invalid JSON: {e.msg}") from e
    decoder = _Decoder()
    result = decoder.decode_struct(data, type_, "", 1)
    if len(decoder.errors) == 1:
        raise decoder.errors[0]
    if decoder.errors:
        raise ConfigErrors(decoder.errors)
    return cast(T, result)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError("", None, f"cannot read {path}: {e}") from e
    return parse_config(text)
