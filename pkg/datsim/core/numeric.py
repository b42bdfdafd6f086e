"""Finite-difference oracles and small numeric helpers."""
from typing import Callable

import numpy as np
import numpy.typing as npt

from .errors import InvalidArgument, NumericError
from .params import Vector

DEFAULT_STEP = 1e-5


def sign0(values: npt.ArrayLike) -> Vector:
    """Elementwise sign with sign(0) = 0."""
    return np.sign(np.asarray(values, dtype=np.float64))


def check_finite(label: str, values: npt.ArrayLike) -> None:
    if not np.all(np.isfinite(values)):
        raise NumericError(label, values)


def finite_diff_grad(
    f: Callable[[Vector], float], x: npt.ArrayLike, step: float = DEFAULT_STEP
) -> Vector:
    """Central-difference gradient estimate of a scalar function at x."""
    if step <= 0:
        raise InvalidArgument(f"Finite-difference step must be positive, got {step}.")
    point = np.array(x, dtype=np.float64)
    flat = point.reshape(-1)
    grad = np.empty_like(flat)
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + step
        upper = float(f(point.copy()))
        flat[j] = orig - step
        lower = float(f(point.copy()))
        flat[j] = orig
        if not (np.isfinite(upper) and np.isfinite(lower)):
            raise NumericError(f"finite difference at component {j}", (upper, lower))
        grad[j] = (upper - lower) / (2.0 * step)
    return grad.reshape(point.shape)
