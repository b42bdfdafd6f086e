import json
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from datsim.core.params import LayeredParams
from datsim.data.dataset import Dataset
from datsim.models.zoo import ModelSpec, init_params


def random_params(spec: ModelSpec, seed: int = 0, scale: float = 1.0) -> LayeredParams:
    params = init_params(spec, np.random.default_rng(seed), scale)
    # nonzero biases so that every layer carries gradient signal
    rng = np.random.default_rng(seed + 1)
    return params.map(lambda layer: layer + 0.1 * rng.normal(size=layer.size))


def separable_pair() -> Dataset:
    """Two points on either side of the origin, classes 0 and 1."""
    return Dataset(np.array([[-2.0], [2.0]]), np.array([0, 1]), 2)


def assert_params_close(a: LayeredParams, b: LayeredParams, atol: float = 1e-9):
    assert a.layout == b.layout
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, atol=atol, rtol=0)


def small_config(
    name: str = "tiny", overrides: Optional[Dict[str, Any]] = None
) -> Dict[str, Any]:
    config: Dict[str, Any] = {
        "name": name,
        "dataset": {
            "generator": "gaussian-mixture",
            "classes": 2,
            "dim": 2,
            "per_class": 24,
            "separation": 3.0,
            "seed": 5,
        },
        "train_attack": {"kind": "pgd", "epsilon": 0.1, "steps": 2},
        "eval_attack": {"kind": "pgd", "epsilon": 0.1, "steps": 3},
        "rounds": 4,
        "eval_every": 2,
        "cluster": {"workers": 2, "per_worker_batch": 6, "seed": 11},
        "optimizer": {"kind": "sgd-momentum", "lr": 0.05},
    }
    for key, value in (overrides or {}).items():
        config[key] = value
    return config


def write_config(path: Path, config: Dict[str, Any]) -> Path:
    path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return path
