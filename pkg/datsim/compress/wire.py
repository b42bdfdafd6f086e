"""Bit-exact encoding of quantized gradient messages.

Layout, all fields packed LSB-first within bytes:

* the norm as an IEEE-754 single precision little-endian float,
* the sign bitmap, component j at bit j,
* the levels, b bits each,
* only when the norm's sign bit is set: an overflow bitmap marking the
  components at level s, whose b-bit field then holds s - 1.

The stored norm is never negative, so its sign bit is free to act as the
overflow flag. Unused bits of the final byte are zero.
"""
import struct

import numpy as np
from bitarray import bitarray

from datsim.core.utils import ceil_div

from .errors import DecodeError, DeserializeError
from .quantizer import MAX_BITS, NORM_BITS, QuantizedGradMessage, message_bits

_SIGN_MASK = 0x8000_0000


def _bits_of(flags: np.ndarray) -> bitarray:
    out = bitarray(endian="little")
    out.pack(np.ascontiguousarray(flags, dtype=np.uint8).tobytes())
    return out


def _flags_of(bits: bitarray) -> np.ndarray:
    return np.frombuffer(bits.unpack(), dtype=np.uint8).astype(bool)


def _level_bits(levels: np.ndarray, width: int) -> np.ndarray:
    shifts = np.arange(width, dtype=np.uint64)
    return ((levels[:, None] >> shifts) & np.uint64(1)).astype(np.uint8).reshape(-1)


def serialize(msg: QuantizedGradMessage) -> bytes:
    s = np.uint64(2**msg.bits)
    at_top = msg.levels == s
    overflow = bool(at_top.any())
    (norm_word,) = struct.unpack("<I", struct.pack("<f", msg.norm))
    if overflow:
        norm_word |= _SIGN_MASK

    stream = bitarray(endian="little")
    stream.frombytes(struct.pack("<I", norm_word))
    stream += _bits_of(msg.signs)
    stored = np.where(at_top, s - np.uint64(1), msg.levels)
    stream += _bits_of(_level_bits(stored, msg.bits))
    if overflow:
        stream += _bits_of(at_top)
    assert len(stream) == msg.bits_used
    return stream.tobytes()


def deserialize(data: bytes, dim: int, bits: int) -> QuantizedGradMessage:
    """Decode ``data`` as a message of ``dim`` components at ``bits`` bits."""
    if not 1 <= bits <= MAX_BITS:
        raise DeserializeError(f"Invalid bit width {bits}.")
    if dim < 1:
        raise DeserializeError(f"Invalid dimension {dim}.")
    if len(data) < 4:
        raise DeserializeError(f"Truncated message: {len(data)} bytes.")
    (norm_word,) = struct.unpack("<I", data[:4])
    overflow = bool(norm_word & _SIGN_MASK)
    expected = ceil_div(message_bits(dim, bits, overflow), 8)
    if len(data) != expected:
        raise DeserializeError(
            f"Message of {dim} components at {bits} bits needs {expected} bytes,"
            f" got {len(data)}."
        )
    (norm,) = struct.unpack("<f", struct.pack("<I", norm_word & ~_SIGN_MASK))

    stream = bitarray(endian="little")
    stream.frombytes(data)
    pos = NORM_BITS
    signs = _flags_of(stream[pos : pos + dim])
    pos += dim
    raw = _flags_of(stream[pos : pos + bits * dim]).reshape(dim, bits)
    pos += bits * dim
    weights = np.uint64(1) << np.arange(bits, dtype=np.uint64)
    levels = (raw.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)
    if overflow:
        at_top = _flags_of(stream[pos : pos + dim])
        pos += dim
        if not np.all(levels[at_top] == np.uint64(2**bits - 1)):
            raise DeserializeError("Overflow bit set on a component below level s - 1.")
        levels = levels + at_top.astype(np.uint64)
        if not at_top.any():
            raise DeserializeError("Overflow flag set but no component overflows.")
    if stream[pos:].any():
        raise DeserializeError("Nonzero padding bits.")
    try:
        return QuantizedGradMessage(float(norm), signs, levels, bits)
    except DecodeError as e:
        raise DeserializeError(str(e)) from e
