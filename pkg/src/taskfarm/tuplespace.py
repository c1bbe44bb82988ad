"""A LINDA-style tuple space with book-kept tuples.

Alongside the usual ``out``/``rd``/``in_``, book-kept tuples are created with
``fout`` and handed out by ``frd``/``fin`` with the Dispatcher's freshness
rule: among matching enabled entries, one with the lowest pick-count wins,
ties broken by a seeded generator. ``disable`` and ``re_enable_all`` play the
part of the collector acknowledgment and the start of a new run.

None of the operations block; an absent match returns ``None``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import count
from typing import Any, Optional, Union

from .dispatcher import DISABLED, pick_freshest
from .errors import FarmError

FIELD_TYPES = (int, float, str, bytes)


class StaleHandle(FarmError, KeyError):
    pass


@dataclass(frozen=True)
class Exact:
    value: Any

    def matches(self, x) -> bool:
        return type(x) is type(self.value) and x == self.value


@dataclass(frozen=True)
class Wildcard:
    type: type

    def matches(self, x) -> bool:
        return type(x) is self.type


Matcher = Union[Exact, Wildcard]


def _matcher(m) -> Matcher:
    if isinstance(m, (Exact, Wildcard)):
        return m
    if isinstance(m, type):
        if m not in FIELD_TYPES:
            raise TypeError(f"unsupported field type {m.__name__}")
        return Wildcard(m)
    return Exact(m)


def pattern(*fields) -> tuple[Matcher, ...]:
    """Build a template: types become wildcards, other values exact matches."""
    return tuple(_matcher(f) for f in fields)


def matches(pat, tup: tuple) -> bool:
    return len(pat) == len(tup) and all(_matcher(m).matches(x) for m, x in zip(pat, tup))


def _check_tuple(t) -> tuple:
    t = tuple(t)
    if not t:
        raise ValueError("a tuple needs at least one field")
    for x in t:
        if type(x) not in FIELD_TYPES:
            raise TypeError(f"unsupported field {x!r}")
    return t


@dataclass(frozen=True)
class Handle:
    id: int


@dataclass
class _Entry:
    fields: tuple
    freshness: Optional[int]  # None for common tuples


class TupleSpace:
    def __init__(self, seed: int = 0):
        self._entries: dict[int, _Entry] = {}
        self._ids = count(1)
        self.rng = random.Random(seed)

    def __len__(self):
        return len(self._entries)

    # -- common tuples --

    def out(self, t) -> None:
        self._entries[next(self._ids)] = _Entry(_check_tuple(t), None)

    def _common(self, pat) -> Optional[int]:
        for key, e in self._entries.items():
            if e.freshness is None and matches(pat, e.fields):
                return key
        return None

    def rd(self, pat) -> Optional[tuple]:
        key = self._common(pat)
        return None if key is None else self._entries[key].fields

    def in_(self, pat) -> Optional[tuple]:
        key = self._common(pat)
        return None if key is None else self._entries.pop(key).fields

    # -- book-kept tuples --

    def fout(self, t) -> Handle:
        key = next(self._ids)
        self._entries[key] = _Entry(_check_tuple(t), 0)
        return Handle(key)

    def _select(self, pat) -> Optional[int]:
        keys = [key for key, e in self._entries.items()
                if e.freshness is not None and matches(pat, e.fields)]
        i = pick_freshest([self._entries[key].freshness for key in keys], self.rng)
        return None if i is None else keys[i]

    def frd(self, pat) -> Optional[tuple]:
        key = self._select(pat)
        if key is None:
            return None
        entry = self._entries[key]
        entry.freshness += 1
        return entry.fields

    def fin(self, pat) -> Optional[tuple]:
        key = self._select(pat)
        if key is None:
            return None
        return self._entries.pop(key).fields

    def _entry(self, handle: Handle) -> _Entry:
        entry = self._entries.get(handle.id)
        if entry is None or entry.freshness is None:
            raise StaleHandle(handle.id)
        return entry

    def freshness(self, handle: Handle) -> int:
        """Current pick-count of a book-kept entry, or ``DISABLED``."""
        return self._entry(handle).freshness

    def disable(self, handle: Handle) -> None:
        self._entry(handle).freshness = DISABLED

    def re_enable_all(self, pat) -> int:
        n = 0
        for e in self._entries.values():
            if e.freshness is not None and matches(pat, e.fields):
                e.freshness = 0
                n += 1
        return n

    def dump(self) -> str:
        lines = []
        for e in self._entries.values():
            if e.freshness is None:
                state = "common"
            elif e.freshness == DISABLED:
                state = "DISABLED"
            else:
                state = str(e.freshness)
            lines.append(f"{state} {e.fields!r}")
        return "\n".join(lines) + ("\n" if lines else "")
