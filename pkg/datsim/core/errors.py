"""Errors shared by every datsim module."""
from dataclasses import dataclass, field
from typing import Any


class DatsimError(Exception):
    """Base class of all datsim failures."""


class InvalidArgument(DatsimError, ValueError):
    pass


@dataclass
class NumericError(DatsimError, ArithmeticError):
    """A computation produced or received a non-finite value."""

    label: str
    values: Any = field(default=None, repr=False)

    def __str__(self) -> str:
        return f"Non-finite value encountered in {self.label}"
