"""Unbiased randomized gradient quantization onto s = 2^b levels."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Union

import numpy as np
import numpy.typing as npt

from datsim.core.errors import InvalidArgument, NumericError
from datsim.core.numeric import check_finite
from datsim.core.params import Vector
from datsim.core.rng import SeededRng

from .errors import DecodeError

QuantizerMode = Literal["off", "one-sided", "two-sided"]
RandomSource = Union[SeededRng, np.random.Generator]

NORM_BITS = 32
FLOAT_BITS = 32
MAX_BITS = 32

# Monte Carlo draws are generated in blocks of this many rows
_CHUNK = 4096


@dataclass(frozen=True)
class QuantizerConfig:
    bits: int = 8
    mode: QuantizerMode = "off"

    def __post_init__(self):
        if not 1 <= self.bits <= MAX_BITS:
            raise InvalidArgument(f"bits must lie in [1, {MAX_BITS}], got {self.bits}.")
        if self.mode not in ("off", "one-sided", "two-sided"):
            raise InvalidArgument(f"Unknown quantizer mode {self.mode!r}.")

    @property
    def levels(self) -> int:
        return 2**self.bits

    @property
    def enabled(self) -> bool:
        return self.mode != "off"


def message_bits(dim: int, bits: int, overflow: bool = False) -> int:
    """Size of a quantized message: norm, sign bitmap, b-bit levels.

    Messages where some component reached the top level s carry one extra
    d-bit overflow bitmap."""
    return NORM_BITS + dim + bits * dim + (dim if overflow else 0)


def raw_bits(dim: int) -> int:
    """Size of an unquantized single precision gradient."""
    return FLOAT_BITS * dim


@dataclass(frozen=True, eq=False)
class QuantizedGradMessage:
    """A quantized gradient: norm * sign_j * level_j / s per component.

    ``signs`` holds True for negative components; ``levels`` lie in [0, s].
    """

    norm: float
    signs: npt.NDArray[np.bool_]
    levels: npt.NDArray[np.uint64]
    bits: int

    def __post_init__(self):
        signs = np.asarray(self.signs, dtype=bool).reshape(-1)
        levels = np.asarray(self.levels, dtype=np.uint64).reshape(-1)
        if signs.size != levels.size:
            raise DecodeError(
                f"Sign bitmap has {signs.size} entries but there are"
                f" {levels.size} levels."
            )
        if not 1 <= self.bits <= MAX_BITS:
            raise DecodeError(f"Invalid bit width {self.bits}.")
        if not (np.isfinite(self.norm) and self.norm >= 0):
            raise DecodeError(f"Invalid message norm {self.norm}.")
        if levels.size and int(levels.max()) > 2**self.bits:
            raise DecodeError(f"Level {int(levels.max())} exceeds {2**self.bits}.")
        if self.norm == 0 and np.any(levels):
            raise DecodeError("A zero-norm message must have all levels zero.")
        signs.setflags(write=False)
        levels.setflags(write=False)
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "levels", levels)

    @classmethod
    def zeros(cls, dim: int, bits: int) -> "QuantizedGradMessage":
        return cls(0.0, np.zeros(dim, bool), np.zeros(dim, np.uint64), bits)

    @property
    def dim(self) -> int:
        return int(self.levels.size)

    @property
    def overflow(self) -> bool:
        return bool(np.any(self.levels == np.uint64(2**self.bits)))

    @property
    def bits_used(self) -> int:
        return message_bits(self.dim, self.bits, self.overflow)

    def equals(self, other: "QuantizedGradMessage") -> bool:
        return (
            self.bits == other.bits
            and np.float32(self.norm).tobytes() == np.float32(other.norm).tobytes()
            and np.array_equal(self.signs, other.signs)
            and np.array_equal(self.levels, other.levels)
        )


def _generator(rng: RandomSource) -> np.random.Generator:
    return rng.generator() if isinstance(rng, SeededRng) else rng


def stored_norm(g: Vector) -> float:
    """||g||_2 as a float32, rounded up so that every |g_j| / norm <= 1."""
    exact = float(np.linalg.norm(g))
    single = np.float32(exact)
    if float(single) < exact:
        single = np.nextafter(single, np.float32(np.inf))
    if not np.isfinite(single):
        raise NumericError("gradient norm (float32 overflow)", exact)
    return float(single)


def _ratios(vec: Vector, norm: float) -> npt.NDArray[np.float64]:
    return np.minimum(np.abs(vec) / norm, 1.0)


def _draw_levels(
    magnitudes: npt.NDArray[np.float64], s: int, uniforms: npt.NDArray[np.float64]
) -> npt.NDArray[np.uint64]:
    scaled = s * magnitudes
    lower = np.minimum(np.floor(scaled), s - 1)
    upper_prob = scaled - lower
    return (lower + (uniforms < upper_prob)).astype(np.uint64)


def quantize(g: npt.ArrayLike, bits: int, rng: RandomSource) -> QuantizedGradMessage:
    """Stochastically round |g_j| / ||g|| onto the grid {0, 1/s, ..., 1}.

    Level l + 1 is drawn with probability s * |g_j| / ||g|| - l, which makes the
    decoded vector an unbiased estimate of g.

    The norm is carried as a float32 (see ``stored_norm``). A component holding
    the whole norm always reaches the top level and decodes to exactly that
    float32 value, which equals |g_j| whenever float32 represents it.
    """
    vec = np.asarray(g, dtype=np.float64).reshape(-1)
    check_finite("quantizer input", vec)
    if not 1 <= bits <= MAX_BITS:
        raise InvalidArgument(f"bits must lie in [1, {MAX_BITS}], got {bits}.")
    norm = stored_norm(vec)
    if norm == 0:
        return QuantizedGradMessage.zeros(vec.size, bits)
    uniforms = _generator(rng).random(vec.size)
    levels = _draw_levels(_ratios(vec, norm), 2**bits, uniforms)
    return QuantizedGradMessage(norm, vec < 0, levels, bits)


def decode(msg: QuantizedGradMessage) -> Vector:
    signs = np.where(msg.signs, -1.0, 1.0)
    return msg.norm * signs * (msg.levels.astype(np.float64) / 2**msg.bits)


def quantize_roundtrip(g: npt.ArrayLike, bits: int, rng: RandomSource) -> Vector:
    return decode(quantize(g, bits, rng))


def empirical_variance(
    g: npt.ArrayLike, bits: int, trials: int, rng: RandomSource
) -> float:
    """Monte Carlo estimate of E||Q(g) - g||^2 over fresh draws."""
    if trials < 1:
        raise InvalidArgument(f"trials must be at least 1, got {trials}.")
    return float(np.mean(squared_errors(g, bits, trials, rng)))


def squared_errors(
    g: npt.ArrayLike, bits: int, trials: int, rng: RandomSource
) -> npt.NDArray[np.float64]:
    """||Q(g) - g||^2 for each of ``trials`` independent quantizations."""
    vec = np.asarray(g, dtype=np.float64).reshape(-1)
    check_finite("quantizer input", vec)
    norm = stored_norm(vec)
    if norm == 0:
        return np.zeros(trials)
    s = 2**bits
    gen = _generator(rng)
    magnitudes = _ratios(vec, norm)
    signs = np.where(vec < 0, -1.0, 1.0)
    out = np.empty(trials)
    for start in range(0, trials, _CHUNK):
        rows = min(_CHUNK, trials - start)
        levels = _draw_levels(magnitudes, s, gen.random((rows, vec.size)))
        decoded = norm * signs * (levels.astype(np.float64) / s)
        out[start : start + rows] = np.sum((decoded - vec) ** 2, axis=1)
    return out


def decoded_mean(
    g: npt.ArrayLike, bits: int, trials: int, rng: RandomSource
) -> tuple[Vector, Vector]:
    """Componentwise sample mean and standard error of decoded quantizations."""
    vec = np.asarray(g, dtype=np.float64).reshape(-1)
    norm = stored_norm(vec)
    if norm == 0:
        return np.zeros_like(vec), np.zeros_like(vec)
    s = 2**bits
    gen = _generator(rng)
    magnitudes = _ratios(vec, norm)
    signs = np.where(vec < 0, -1.0, 1.0)
    total = np.zeros_like(vec)
    total_sq = np.zeros_like(vec)
    for start in range(0, trials, _CHUNK):
        rows = min(_CHUNK, trials - start)
        levels = _draw_levels(magnitudes, s, gen.random((rows, vec.size)))
        decoded = norm * signs * (levels.astype(np.float64) / s)
        total += decoded.sum(axis=0)
        total_sq += (decoded**2).sum(axis=0)
    mean = total / trials
    var = np.maximum(total_sq / trials - mean**2, 0.0)
    return mean, np.sqrt(var / trials)


def variance_bound(dim: int, bits: int) -> float:
    """min{d / s^2, sqrt(d) / s}: the relative quantization variance bound."""
    s = 2.0**bits
    return min(dim / s**2, np.sqrt(dim) / s)
