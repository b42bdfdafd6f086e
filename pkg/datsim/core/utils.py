"""Simple utilities useful throughout the codebase."""
import asyncio
from concurrent.futures import ThreadPoolExecutor
from functools import wraps
from typing import Awaitable, Callable, TypeVar

R = TypeVar("R")


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def async_to_sync(func: Callable[..., Awaitable[R]]) -> Callable[..., R]:
    """
    Converts an asynchronous function into a synchronous one by running it
    on a new async event loop in a newly created thread.
    """

    @wraps(func)
    def sync(*args, **kwargs):
        with ThreadPoolExecutor(max_workers=1) as executor:
            future = executor.submit(lambda: asyncio.run(func(*args, **kwargs)))
            return future.result()

    return sync
