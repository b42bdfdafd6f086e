"""Layered parameter containers and the l-infinity geometry built on them."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from .errors import InvalidArgument

Layout = Tuple[int, ...]
Vector = npt.NDArray[np.float64]


def _frozen(values: npt.ArrayLike) -> Vector:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LayeredParams:
    """Model parameters partitioned into h dense layers.

    Layers are stored as read-only float64 vectors, so instances can be shared
    between worker threads without copying.
    """

    layers: Tuple[Vector, ...]

    def __init__(self, layers: Iterable[npt.ArrayLike]):
        frozen = tuple(_frozen(layer) for layer in layers)
        if not frozen:
            raise InvalidArgument("LayeredParams needs at least one layer.")
        if any(layer.size == 0 for layer in frozen):
            raise InvalidArgument("Every layer needs at least one entry.")
        object.__setattr__(self, "layers", frozen)

    @classmethod
    def zeros(cls, layout: Sequence[int]) -> "LayeredParams":
        return cls(np.zeros(d_i) for d_i in layout)

    @classmethod
    def unflatten(cls, layout: Sequence[int], vector: npt.ArrayLike) -> "LayeredParams":
        flat = np.asarray(vector, dtype=np.float64).reshape(-1)
        if flat.size != sum(layout):
            raise InvalidArgument(
                f"Vector of length {flat.size} does not fit layout {tuple(layout)}."
            )
        bounds = np.cumsum(layout)[:-1]
        return cls(np.split(flat, bounds))

    @property
    def layout(self) -> Layout:
        return tuple(layer.size for layer in self.layers)

    @property
    def layer_count(self) -> int:
        return len(self.layers)

    @property
    def total_dim(self) -> int:
        return sum(self.layout)

    def flatten(self) -> Vector:
        return np.concatenate(self.layers)

    def zeros_like(self) -> "LayeredParams":
        return LayeredParams.zeros(self.layout)

    def map(self, f: Callable[[Vector], npt.ArrayLike]) -> "LayeredParams":
        return LayeredParams(f(layer) for layer in self.layers)

    def zip_map(
        self, other: "LayeredParams", f: Callable[[Vector, Vector], npt.ArrayLike]
    ) -> "LayeredParams":
        self.check_layout(other)
        return LayeredParams(f(a, b) for a, b in zip(self.layers, other.layers))

    def check_layout(self, other: "LayeredParams") -> None:
        if self.layout != other.layout:
            raise InvalidArgument(
                f"Layout mismatch: {self.layout} and {other.layout}."
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.flatten()))

    def dot(self, other: "LayeredParams") -> float:
        self.check_layout(other)
        return float(np.dot(self.flatten(), other.flatten()))

    def is_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(layer))) for layer in self.layers)

    def __iter__(self) -> Iterator[Vector]:
        return iter(self.layers)

    def __len__(self) -> int:
        return len(self.layers)

    def __getitem__(self, index: int) -> Vector:
        return self.layers[index]

    def __add__(self, other: "LayeredParams") -> "LayeredParams":
        return self.zip_map(other, np.add)

    def __sub__(self, other: "LayeredParams") -> "LayeredParams":
        return self.zip_map(other, np.subtract)

    def __mul__(self, scalar: float) -> "LayeredParams":
        return self.map(lambda layer: layer * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "LayeredParams":
        return self.map(np.negative)

    def equals(self, other: "LayeredParams") -> bool:
        """Bitwise equality of layouts and values."""
        return self.layout == other.layout and all(
            a.tobytes() == b.tobytes() for a, b in zip(self.layers, other.layers)
        )

    def __repr__(self) -> str:
        return f"LayeredParams(layout={self.layout})"


def layer_norms(params: LayeredParams) -> list[float]:
    """Euclidean norm of every layer, in layer order."""
    return [float(np.linalg.norm(layer)) for layer in params.layers]


def mean_params(items: Sequence[LayeredParams]) -> LayeredParams:
    """Mean of layered values, summed left to right in the given order."""
    if not items:
        raise InvalidArgument("Cannot average an empty collection.")
    total = items[0]
    for item in items[1:]:
        total = total + item
    return total * (1.0 / len(items))


def project_linf(v: npt.ArrayLike, center: npt.ArrayLike, radius: float) -> Vector:
    """Clamp every component of v into [center_j - radius, center_j + radius]."""
    if radius < 0:
        raise InvalidArgument(f"Projection radius must be nonnegative, got {radius}.")
    v_arr = np.asarray(v, dtype=np.float64)
    c_arr = np.asarray(center, dtype=np.float64)
    if v_arr.shape != c_arr.shape:
        raise InvalidArgument(
            f"Vector shape {v_arr.shape} does not match center {c_arr.shape}."
        )
    if radius == 0:
        return c_arr.copy()
    return np.clip(v_arr, c_arr - radius, c_arr + radius)
