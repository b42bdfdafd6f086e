from datsim.core.errors import DatsimError


class DecodeError(DatsimError):
    """A quantized message is internally inconsistent."""


class DeserializeError(DatsimError):
    """A byte string is not a valid encoding of a quantized message."""
