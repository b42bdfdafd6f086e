"""Runtime exceptions."""
from dataclasses import dataclass
from typing import Optional

from datsim.core.errors import DatsimError


@dataclass
class ProtocolError(DatsimError):
    """Worker messages that cannot be combined."""

    reason: str

    def __str__(self) -> str:
        return f"Aggregation protocol violated: {self.reason}"


@dataclass
class NonFiniteLoss(DatsimError):
    round_: int
    checkpoint: Optional[str] = None

    def __str__(self) -> str:
        msg = f"Training diverged at round {self.round_}"
        if self.checkpoint is not None:
            msg += f"; diagnostic checkpoint written to {self.checkpoint}"
        return msg


class CheckpointError(DatsimError):
    pass
