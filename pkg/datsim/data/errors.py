from dataclasses import dataclass
from typing import Optional

from datsim.core.errors import DatsimError


class GeneratorError(DatsimError):
    """The requested synthetic dataset cannot be constructed."""


@dataclass
class DatasetFormatError(DatsimError):
    path: str
    line: Optional[int]
    reason: str

    def __str__(self) -> str:
        where = self.path if self.line is None else f"{self.path}:{self.line}"
        return f"{where}: {self.reason}"
