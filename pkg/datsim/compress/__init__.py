"""Randomized gradient quantization and its wire format."""

from .errors import DecodeError, DeserializeError
from .quantizer import (
    QuantizedGradMessage,
    QuantizerConfig,
    decode,
    empirical_variance,
    message_bits,
    quantize,
    raw_bits,
    variance_bound,
)
from .wire import deserialize, serialize
