from __future__ import annotations

from time import perf_counter
from contextlib import contextmanager
from typing import (
    Optional,
    Any,
    List,
    Dict,
    Tuple,
    Callable,
    Iterable,
    Iterator,
    Sequence,
    TypeVar,
)


__all__ = [
    # functions
    "group_by",
    "is_sorted",
    "parse_floats",
    # classes
    "CacheDict",
    "StageTimer",
]
# Type variable for internal utils typing
_X = TypeVar("_X")
_Y = TypeVar("_Y")


def group_by(iterable: Iterable[_X], key: Callable[[_X], _Y]) -> Dict[_Y, List[_X]]:
    """
    A helper function for grouping elements of an iterable into a dictionary, where each key
    represents a common value, and the value represents a list of elements having said
    common value. Element order within each group is preserved.

    Parameters
    ----------
    iterable : Iterable[X]
        An iterable of elements to group.
    key : Callable[[X], Y]
        A function that takes each element from the provided iterable as it's parameter,
        and outputs a group to which said element belongs to.

    Returns
    -------
    Dict[Y, List[X]]
        A mapping of groups to lists of grouped elements.
    """
    item_map: Dict[_Y, List[_X]] = {}
    for item in iterable:
        group = key(item)
        if group not in item_map:
            item_map[group] = []
        item_map[group].append(item)
    return item_map


def is_sorted(items: Sequence[_X], key: Callable[[_X], Any]) -> bool:
    """
    Checks if the sequence is sorted in non-decreasing order of the ``key``.
    """
    return all(key(a) <= key(b) for a, b in zip(items, items[1:]))


def parse_floats(text: str, count: Optional[int] = None) -> Tuple[float, ...]:
    """
    Parses a comma or whitespace delimited list of numbers, like ``"0, 120, 320, 120"``.

    Parameters
    ----------
    text : str
        The text to parse.
    count : Optional[int]
        The exact amount of numbers expected. Not checked if not provided.

    Returns
    -------
    Tuple[float, ...]
        The parsed numbers.

    Raises
    ------
    ValueError
        A number couldn't be parsed, or the amount of numbers was wrong.
    """
    parts = [part for part in text.replace(',', ' ').split() if part]
    numbers = tuple(float(part) for part in parts)
    if count is not None and len(numbers) != count:
        raise ValueError(f"expected {count} numbers, got {len(numbers)}")
    return numbers


class CacheDict(Dict[_X, _Y]):
    """
    A dictionary that creates missing values on first access, using a factory
    that receives the missing key.
    """
    def __init__(self, value_factory: Callable[[_X], _Y], *args, **kwargs):
        self._value_factory = value_factory
        super().__init__(*args, **kwargs)

    def __missing__(self, key: _X) -> _Y:
        value = self._value_factory(key)
        super().__setitem__(key, value)
        return value


class StageTimer:
    """
    Accumulates wall-clock time spent in named pipeline stages.

    Stage names keep the order in which they were first timed.

    Attributes
    ----------
    totals : Dict[str, float]
        Accumulated seconds per stage.
    """
    def __init__(self, stages: Iterable[str] = ()):
        self.totals: Dict[str, float] = {name: 0.0 for name in stages}

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        start = perf_counter()
        try:
            yield
        finally:
            self.totals[name] = self.totals.get(name, 0.0) + perf_counter() - start

    def total(self) -> float:
        """
        The sum of all stage totals, in seconds.
        """
        return sum(self.totals.values())

    def milliseconds(self) -> Dict[str, float]:
        """
        Stage totals converted to milliseconds.
        """
        return {name: seconds * 1000 for name, seconds in self.totals.items()}
