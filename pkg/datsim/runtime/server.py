"""Server side of a round: average the worker gradients, optionally recompress."""
from dataclasses import dataclass
from typing import Optional, Sequence

from datsim.compress.quantizer import (
    QuantizedGradMessage,
    QuantizerConfig,
    decode,
    quantize,
    raw_bits,
)
from datsim.core import Tags
from datsim.core.errors import InvalidArgument
from datsim.core.params import LayeredParams, Layout
from datsim.core.rng import SERVER_ID, SeededRng

from .errors import ProtocolError
from .worker import WorkerUpdate


@dataclass(frozen=True)
class Aggregate:
    g_hat: LayeredParams
    broadcast: Optional[QuantizedGradMessage]

    @property
    def broadcast_bits(self) -> int:
        if self.broadcast is not None:
            return self.broadcast.bits_used
        return raw_bits(self.g_hat.total_dim)


def aggregate(
    updates: Sequence[WorkerUpdate],
    layout: Layout,
    quantizer: QuantizerConfig,
    seed: int,
    round_: int,
) -> Aggregate:
    """Mean of the decoded worker gradients, summed in ascending worker order.

    With two-sided quantization the mean is quantized again before it is
    broadcast, and the decoded broadcast is returned.
    """
    if not updates:
        raise InvalidArgument("Nothing to aggregate.")
    ordered = sorted(updates, key=lambda u: u.worker_id)
    total: Optional[LayeredParams] = None
    for update in ordered:
        dim = (
            update.payload.dim
            if isinstance(update.payload, QuantizedGradMessage)
            else update.payload.total_dim
        )
        if dim != sum(layout):
            raise ProtocolError(
                f"worker {update.worker_id} sent {dim} components,"
                f" expected {sum(layout)}"
            )
        try:
            grad = update.gradient(layout)
        except InvalidArgument as e:
            raise ProtocolError(f"worker {update.worker_id}: {e}") from e
        if grad.layout != tuple(layout):
            raise ProtocolError(
                f"worker {update.worker_id} sent layout {grad.layout},"
                f" expected {tuple(layout)}"
            )
        total = grad if total is None else total + grad
    assert total is not None
    g_hat = total * (1.0 / len(ordered))

    if quantizer.mode != "two-sided":
        return Aggregate(g_hat, None)
    stream = SeededRng.for_stream(seed, SERVER_ID, round_, Tags.SERVER_QUANTIZE)
    msg = quantize(g_hat.flatten(), quantizer.bits, stream)
    return Aggregate(LayeredParams.unflatten(layout, decode(msg)), msg)
