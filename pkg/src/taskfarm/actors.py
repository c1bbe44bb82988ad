"""Farmer, Worker and Collector state machines.

Each actor is a small mutable object whose handler methods take one input
and return the messages it emits as ``(destination, message)`` pairs. The
actors never schedule anything themselves; the transport (see
``taskfarm.simnet``) decides when a message arrives and when a computation
completes.
"""

from __future__ import annotations

import enum
import logging
import random
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence, Union

from .dispatcher import Outgoing
from .errors import FarmError, OutOfRangeBlock, ProtocolError
from .protocol import (COLLECTOR, DISPATCHER, BlockCouple, Message, NewRun,
                       OutputCouple, Request, Resume, Sleep, SlotAck, Stop,
                       WorkCouple)

log = logging.getLogger(__name__)


class IndivisibleImage(FarmError, ValueError):
    pass


def decompose(image: bytes, m: int) -> list[bytes]:
    """Split ``image`` into ``m`` equally sized blocks."""
    if m < 1:
        raise ValueError("m must be at least 1")
    if len(image) % m:
        raise IndivisibleImage(f"image of {len(image)} bytes cannot be split into {m} blocks")
    size = len(image) // m
    return [bytes(image[i * size:(i + 1) * size]) for i in range(m)]


def synthetic_camera(count: int, size: int, seed: int = 0) -> Iterator[bytes]:
    """Yield ``count`` pseudo-random images of ``size`` bytes."""
    rng = random.Random(seed)
    for _ in range(count):
        yield rng.randbytes(size)


# -- Farmer -----------------------------------------------------------------

@dataclass
class Farmer:
    m: int
    source: Iterator[bytes]
    current_blocks: Optional[list[bytes]] = None
    next_blocks: Optional[list[bytes]] = None
    acked: set[int] = field(default_factory=set)
    sent_next: set[int] = field(default_factory=set)
    runs_started: int = 0
    stopped: bool = False

    def _next_image(self) -> Optional[list[bytes]]:
        image = next(self.source, None)
        if image is None:
            return None
        return decompose(image, self.m)

    def bootstrap(self) -> Outgoing:
        self.current_blocks = self._next_image()
        if self.current_blocks is None:
            self.stopped = True
            return [(DISPATCHER, Stop())]
        out: Outgoing = [(DISPATCHER, BlockCouple(i, b))
                         for i, b in enumerate(self.current_blocks, start=1)]
        out.append((DISPATCHER, NewRun()))
        self.runs_started = 1
        self.next_blocks = self._next_image()
        return out

    def on_ack(self, k: int) -> Outgoing:
        if not 1 <= k <= self.m:
            raise OutOfRangeBlock(k, self.m)
        if self.stopped or k in self.acked:
            return []
        self.acked.add(k)
        out: Outgoing = []
        if self.next_blocks is not None and k not in self.sent_next:
            out.append((DISPATCHER, BlockCouple(k, self.next_blocks[k - 1])))
            self.sent_next.add(k)
        if len(self.acked) == self.m:
            self.acked.clear()
            self.sent_next.clear()
            if self.next_blocks is None:
                self.stopped = True
                out.append((DISPATCHER, Stop()))
            else:
                out.append((DISPATCHER, NewRun()))
                self.current_blocks = self.next_blocks
                self.next_blocks = self._next_image()
                self.runs_started += 1
        return out

    def external_stop(self) -> Outgoing:
        """Terminate on an outside request, possibly mid-run."""
        if self.stopped:
            return []
        self.stopped = True
        return [(DISPATCHER, Stop())]


# -- Worker -----------------------------------------------------------------

class Mode(enum.Enum):
    REQUESTING = "requesting"
    COMPUTING = "computing"
    SLEEPING = "sleeping"
    STOPPED = "stopped"


class ComputeComplete:
    """Internal event: the worker function has finished on the current block."""

    def __repr__(self):
        return "ComputeComplete()"


COMPUTE_COMPLETE = ComputeComplete()


def invert(block: bytes) -> bytes:
    return bytes(0xFF - x for x in block)


@dataclass
class Worker:
    j: int
    worker_fn: Callable[[bytes], bytes] = invert
    mode: Mode = Mode.REQUESTING
    k: Optional[int] = None
    block: Optional[bytes] = None

    def start(self) -> Outgoing:
        """First iteration of the loop: announce availability."""
        self.mode = Mode.REQUESTING
        self.k = self.block = None
        return [(DISPATCHER, Request(self.j))]

    def step(self, msg: Union[Message, ComputeComplete]) -> Outgoing:
        if self.mode is Mode.STOPPED:
            raise ProtocolError(f"worker {self.j} is stopped")
        if isinstance(msg, Stop):
            self.mode = Mode.STOPPED
            self.k = self.block = None
            return []
        mode = self.mode
        if mode is Mode.REQUESTING:
            if isinstance(msg, WorkCouple):
                self.mode = Mode.COMPUTING
                self.k, self.block = msg.k, msg.block
                return []
            if isinstance(msg, Sleep):
                self.mode = Mode.SLEEPING
                return []
            if isinstance(msg, Resume):
                # our request is already on its way; its answer will follow
                return []
        elif mode is Mode.COMPUTING:
            if isinstance(msg, ComputeComplete):
                out: Outgoing = [(COLLECTOR, OutputCouple(self.k, self.worker_fn(self.block))),
                                 (DISPATCHER, Request(self.j))]
                self.mode = Mode.REQUESTING
                self.k = self.block = None
                return out
            if isinstance(msg, Resume):
                log.debug("worker %d abandons block %d", self.j, self.k)
                return self.start()
        elif mode is Mode.SLEEPING:
            if isinstance(msg, Resume):
                return self.start()
            if isinstance(msg, Sleep):
                return []
        raise ProtocolError(f"worker {self.j}: {msg!r} while {mode.value}")


# -- Collector --------------------------------------------------------------

FREE = False
BUSY = True


@dataclass(frozen=True)
class Ignore:
    pass


@dataclass(frozen=True)
class Mismatch:
    details: str


DetectVerdict = Union[Ignore, Mismatch]


def byte_compare(k: int, existing: bytes, new: bytes) -> DetectVerdict:
    """Default detect hook: keep the first output, flag differing duplicates."""
    if existing == new:
        return Ignore()
    return Mismatch(f"block {k}: {len(existing)}-byte output differs from "
                    f"{len(new)}-byte duplicate")


def concatenate(outputs: Sequence[bytes]) -> bytes:
    return b"".join(outputs)


@dataclass
class Collector:
    m: int
    detect_hook: Callable[[int, bytes, bytes], DetectVerdict] = byte_compare
    post_process: Callable[[Sequence[bytes]], bytes] = concatenate
    sink: list[bytes] = field(default_factory=list)
    p: list[Optional[bytes]] = field(init=False)
    f: list[bool] = field(init=False)
    verdicts: list[tuple[int, DetectVerdict]] = field(default_factory=list)
    runs_completed: int = 0
    duplicate_outputs: int = 0
    mismatches: int = 0
    partials_on_stop: Optional[int] = None

    def __post_init__(self):
        self.p = [None] * self.m
        self.f = [FREE] * self.m

    @property
    def stopped(self) -> bool:
        return self.partials_on_stop is not None

    def on_output(self, k: int, o: bytes) -> tuple[Outgoing, Optional[bytes]]:
        if not 1 <= k <= self.m:
            raise OutOfRangeBlock(k, self.m)
        if self.f[k - 1] == FREE:
            self.p[k - 1] = o
            self.f[k - 1] = BUSY
            return [(DISPATCHER, SlotAck(k))], self._check_if_full()
        self.duplicate_outputs += 1
        verdict = self.detect_hook(k, self.p[k - 1], o)
        self.verdicts.append((k, verdict))
        if isinstance(verdict, Mismatch):
            self.mismatches += 1
            log.warning("collector: %s", verdict.details)
        return [], None

    def _check_if_full(self) -> Optional[bytes]:
        if not all(self.f):
            return None
        artifact = self.post_process(list(self.p))
        self.sink.append(artifact)
        self.runs_completed += 1
        self.p = [None] * self.m
        self.f = [FREE] * self.m
        return artifact

    def on_stop(self) -> int:
        """Freeze the ledger; return how many filled slots were discarded."""
        if self.partials_on_stop is None:
            self.partials_on_stop = sum(self.f)
        return self.partials_on_stop
