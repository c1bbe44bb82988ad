"""The Dispatcher: freshness bookkeeping and on-demand work assignment.

Each block ``k`` has a freshness entry ``s[k]``: either ``DISABLED`` or the
number of times the block has been handed to a Worker during the current
run. A requesting Worker gets a block drawn from the minimum-count class of
the enabled entries, so brand-new blocks (count 0) always go out first and a
block lost to a crashed or slow Worker is re-issued only once nothing fresher
is left.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import OutOfRangeBlock, ProtocolError
from .protocol import (COLLECTOR, FARMER, Address, BlockAck, Message, Resume,
                       Sleep, Stop, WorkCouple, worker)

# Not a valid pick-count; any negative value would do.
DISABLED = -1

Outgoing = list[tuple[Address, Message]]


def pick_freshest(counts: Sequence[int], rng: random.Random) -> Optional[int]:
    """Index of an enabled entry with the minimum count, or None if all are disabled.

    Ties are broken uniformly with ``rng``. The generator is consumed only
    when the minimum class holds more than one entry.
    """
    best = None
    candidates: list[int] = []
    for i, c in enumerate(counts):
        if c == DISABLED:
            continue
        if best is None or c < best:
            best = c
            candidates = [i]
        elif c == best:
            candidates.append(i)
    if not candidates:
        return None
    if len(candidates) == 1:
        return candidates[0]
    return candidates[rng.randrange(len(candidates))]


@dataclass(frozen=True)
class AlarmEvent:
    """A block has been picked more often than the threshold allows."""

    k: int
    count: int


@dataclass
class Dispatcher:
    m: int
    n: int
    threshold: int = 3
    seed: int = 0
    s: list[int] = field(init=False)
    w: list[Optional[bytes]] = field(init=False)
    assignments: dict[int, int] = field(init=False, default_factory=dict)
    sleepers: set[int] = field(init=False, default_factory=set)
    workers: set[int] = field(init=False)
    stopped: bool = field(init=False, default=False)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.threshold < 0:
            raise ValueError("threshold must be non-negative")
        self.s = [DISABLED] * self.m
        self.w = [None] * self.m
        self.workers = set(range(1, self.n + 1))
        self.rng = random.Random(self.seed)

    def _check(self, k: int):
        if not 1 <= k <= self.m:
            raise OutOfRangeBlock(k, self.m)

    def freshness(self, k: int) -> int:
        self._check(k)
        return self.s[k - 1]

    def on_block_couple(self, k: int, block: bytes) -> Outgoing:
        self._check(k)
        self.s[k - 1] = DISABLED
        self.w[k - 1] = block
        return []

    def on_new_run(self) -> Outgoing:
        self.s = [0] * self.m
        self.sleepers.clear()
        self.assignments.clear()
        return [(worker(j), Resume()) for j in sorted(self.workers)]

    def select_block(self, j: int) -> Message:
        """Answer worker ``j`` with a ``WorkCouple`` or ``Sleep``."""
        if j in self.assignments:
            raise ProtocolError(f"worker {j} requested while still assigned")
        index = pick_freshest(self.s, self.rng)
        if index is None:
            self.sleepers.add(j)
            return Sleep()
        block = self.w[index]
        if block is None:
            raise ProtocolError(f"block {index + 1} enabled with an empty work buffer")
        self.s[index] += 1
        self.assignments[j] = index + 1
        return WorkCouple(index + 1, block)

    def check_threshold(self, k: int) -> Optional[AlarmEvent]:
        count = self.freshness(k)
        if count != DISABLED and count > self.threshold:
            return AlarmEvent(k, count)
        return None

    def on_request(self, j: int) -> tuple[Outgoing, Optional[AlarmEvent]]:
        """Handle ``Request(j)``; a request retires the worker's previous assignment."""
        self.workers.add(j)
        self.assignments.pop(j, None)
        self.sleepers.discard(j)
        reply = self.select_block(j)
        alarm = None
        if isinstance(reply, WorkCouple):
            alarm = self.check_threshold(reply.k)
        return [(worker(j), reply)], alarm

    def on_slot_ack(self, k: int) -> Outgoing:
        self._check(k)
        self.s[k - 1] = DISABLED
        out: Outgoing = [(FARMER, BlockAck(k))]
        losers = sorted(j for j, b in self.assignments.items() if b == k)
        for j in losers:
            del self.assignments[j]
            out.append((worker(j), Resume()))
        return out

    def on_stop(self) -> Outgoing:
        self.stopped = True
        out: Outgoing = [(worker(j), Stop()) for j in sorted(self.workers)]
        out.append((COLLECTOR, Stop()))
        return out
