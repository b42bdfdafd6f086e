"""Named registries of callables, used for inner oracles and probes."""
from dataclasses import dataclass
from inspect import getdoc
from typing import (
    Callable,
    Dict,
    Generic,
    Iterator,
    Mapping,
    Optional,
    Sequence,
    TypeVar,
)

F = TypeVar("F", bound=Callable)


@dataclass(frozen=True)
class Entry(Generic[F]):
    """Registered python function."""

    name: str
    run: F
    description: str


@dataclass
class NameClash(Exception):
    registry: str
    name: str

    def __str__(self) -> str:
        return f"'{self.name}' is already registered in {self.registry}."


@dataclass
class UnknownName(KeyError):
    registry: str
    name: str
    known: tuple[str, ...]

    def __str__(self) -> str:
        return (
            f"Unknown {self.registry} '{self.name}'."
            f" Choose one of: {', '.join(self.known)}."
        )


class Registry(Mapping[str, Entry[F]]):
    """Mapping from names to documented callables, filled by a decorator.

    Aliases resolve on lookup but are not iterated.
    """

    label: str
    entries: Dict[str, Entry[F]]
    aliases: Dict[str, str]

    def __init__(self, label: str):
        self.label = label
        self.entries = {}
        self.aliases = {}

    def __getitem__(self, __k: str) -> Entry[F]:
        try:
            return self.entries[self.aliases.get(__k, __k)]
        except KeyError as e:
            raise UnknownName(self.label, __k, tuple(sorted(self.entries))) from e

    def __iter__(self) -> Iterator[str]:
        return self.entries.__iter__()

    def __len__(self) -> int:
        return self.entries.__len__()

    def names(self) -> list[str]:
        """Registered names and aliases, sorted."""
        return sorted([*self.entries, *self.aliases])

    def register(
        self, name: Optional[str] = None, aliases: Sequence[str] = ()
    ) -> Callable[[F], F]:
        """Decorator adding a function under its name (or the given one)."""

        def decorator(func: F) -> F:
            func_name = name or func.__name__.replace("_", "-")
            for key in (func_name, *aliases):
                if key in self.entries or key in self.aliases:
                    raise NameClash(self.label, key)
            self.entries[func_name] = Entry(func_name, func, getdoc(func) or "")
            self.aliases.update((alias, func_name) for alias in aliases)
            return func

        return decorator
