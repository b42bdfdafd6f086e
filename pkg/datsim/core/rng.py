"""Deterministic random streams keyed by (seed, worker, round, purpose)."""
import zlib
from dataclasses import dataclass
from typing import Tuple

import numpy as np

StreamId = Tuple[int, int, str]

# Streams that do not belong to a worker (server, evaluation, data generation).
SERVER_ID = -1


def _tag_code(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


@dataclass(frozen=True)
class SeededRng:
    """A reproducible random stream.

    Draws depend only on ``seed`` and ``stream_id``, never on the order in
    which streams are created, so threads may consume their own streams in
    any interleaving.
    """

    seed: int
    stream_id: StreamId = (SERVER_ID, 0, "")

    @classmethod
    def for_stream(cls, seed: int, worker: int, round_: int, tag: str) -> "SeededRng":
        return cls(seed, (worker, round_, tag))

    def child(self, worker: int, round_: int, tag: str) -> "SeededRng":
        return SeededRng(self.seed, (worker, round_, tag))

    def generator(self) -> np.random.Generator:
        """A fresh numpy generator positioned at the start of this stream."""
        worker, round_, tag = self.stream_id
        # spawn keys must be nonnegative
        sequence = np.random.SeedSequence(
            self.seed & (2**64 - 1),
            spawn_key=(worker + 1, round_ + 1, _tag_code(tag)),
        )
        return np.random.Generator(np.random.PCG64(sequence))
