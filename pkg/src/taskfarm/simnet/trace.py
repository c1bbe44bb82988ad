"""Event traces: what happened during a simulation, in order.

A trace is a list of records. Message records are written when a message
reaches its receiver (including receivers that are crashed or stopped and
drop it). System records, sent from the ``system`` address, mark fault
activations, alarms, completed runs and other observations; their body uses
tags from 0x80 upwards so they never collide with message tags.

Binary file layout: the 4-byte magic ``TFTR`` followed by records, each an
8-byte little-endian timestamp, 2-byte sender, 2-byte receiver and a body.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Union

from ..protocol import (SYSTEM, Address, MalformedMessage, Message, Role,
                        describe, encode_message, pack_record_header,
                        read_message, unpack_record_header)

MAGIC = b"TFTR"


@dataclass(frozen=True)
class FaultActivated:
    kind: str  # crash | slowdown | slowdown-end | rejoin
    worker: int
    factor: Fraction = Fraction(1)


@dataclass(frozen=True)
class Alarm:
    k: int
    count: int


@dataclass(frozen=True)
class RunComplete:
    run: int


@dataclass(frozen=True)
class Detect:
    k: int
    mismatch: bool


@dataclass(frozen=True)
class ComputeDone:
    worker: int
    k: int


@dataclass(frozen=True)
class Abandon:
    worker: int
    k: int


@dataclass(frozen=True)
class Straggler:
    """A late output from an earlier run reached the Collector and was discarded."""

    k: int
    run: int


@dataclass(frozen=True)
class CollectorStopped:
    partials: int


@dataclass(frozen=True)
class Truncated:
    reason: str  # stop_at | alarm


SystemEvent = Union[FaultActivated, Alarm, RunComplete, Detect, ComputeDone,
                    Abandon, Straggler, CollectorStopped, Truncated]

_FAULT_KINDS = ("crash", "slowdown", "slowdown-end", "rejoin")
_TRUNCATE_REASONS = ("stop_at", "alarm")

_EVENTS = {
    FaultActivated: (0x80, struct.Struct("<BHII")),
    Alarm: (0x81, struct.Struct("<II")),
    RunComplete: (0x82, struct.Struct("<I")),
    Detect: (0x83, struct.Struct("<IB")),
    ComputeDone: (0x84, struct.Struct("<HI")),
    Abandon: (0x85, struct.Struct("<HI")),
    Straggler: (0x86, struct.Struct("<II")),
    CollectorStopped: (0x87, struct.Struct("<I")),
    Truncated: (0x88, struct.Struct("<B")),
}
_EVENT_BY_TAG = {tag: (cls, st) for cls, (tag, st) in _EVENTS.items()}


def encode_event(ev: SystemEvent) -> bytes:
    tag, st = _EVENTS[type(ev)]
    if isinstance(ev, FaultActivated):
        fields = (_FAULT_KINDS.index(ev.kind), ev.worker, ev.factor.numerator, ev.factor.denominator)
    elif isinstance(ev, Detect):
        fields = (ev.k, int(ev.mismatch))
    elif isinstance(ev, Truncated):
        fields = (_TRUNCATE_REASONS.index(ev.reason),)
    else:
        fields = tuple(vars(ev).values())
    return bytes([tag]) + st.pack(*fields)


def read_event(buf: bytes, offset: int) -> tuple[SystemEvent, int]:
    if offset >= len(buf):
        raise MalformedMessage("empty system record")
    entry = _EVENT_BY_TAG.get(buf[offset])
    if entry is None:
        raise MalformedMessage(f"unknown system record tag 0x{buf[offset]:02x}")
    cls, st = entry
    start = offset + 1
    if start + st.size > len(buf):
        raise MalformedMessage(f"truncated {cls.__name__} record")
    fields = st.unpack_from(buf, start)
    end = start + st.size
    try:
        if cls is FaultActivated:
            kind, w, num, den = fields
            return FaultActivated(_FAULT_KINDS[kind], w, Fraction(num, den)), end
        if cls is Detect:
            if fields[1] > 1:
                raise MalformedMessage("bad Detect flag")
            return Detect(fields[0], bool(fields[1])), end
        if cls is Truncated:
            return Truncated(_TRUNCATE_REASONS[fields[0]]), end
    except (IndexError, ZeroDivisionError):
        raise MalformedMessage(f"bad field in {cls.__name__} record") from None
    return cls(*fields), end


@dataclass(frozen=True)
class TraceRecord:
    time: int
    sender: Address
    receiver: Address
    body: Union[Message, SystemEvent]

    @property
    def is_event(self) -> bool:
        return self.sender.role is Role.SYSTEM

    def encode(self) -> bytes:
        head = pack_record_header(self.time, self.sender, self.receiver)
        if self.is_event:
            return head + encode_event(self.body)
        return head + encode_message(self.body)

    def render(self) -> str:
        if self.is_event:
            return f"t={self.time} {self.sender} -> {self.receiver} {_render_event(self.body)}"
        return f"t={self.time} {self.sender} -> {self.receiver} {describe(self.body)}"


def _render_event(ev: SystemEvent) -> str:
    fields = ", ".join(f"{k}={v}" for k, v in vars(ev).items())
    return f"{type(ev).__name__}({fields})"


class EventTrace(list):
    """A list of ``TraceRecord`` with serialization helpers."""

    def encode(self) -> bytes:
        return MAGIC + b"".join(r.encode() for r in self)

    def render_text(self) -> str:
        return "".join(r.render() + "\n" for r in self)

    def messages(self) -> Iterator[TraceRecord]:
        return (r for r in self if not r.is_event)

    def events(self, kind=None) -> Iterator[TraceRecord]:
        return (r for r in self if r.is_event and (kind is None or isinstance(r.body, kind)))

    @classmethod
    def decode(cls, data: bytes) -> "EventTrace":
        if data[:4] != MAGIC:
            raise MalformedMessage("not a binary trace (bad magic)")
        out = cls()
        pos = 4
        while pos < len(data):
            time, sender, receiver, pos = unpack_record_header(data, pos)
            if sender.role is Role.SYSTEM:
                body, pos = read_event(data, pos)
            else:
                body, pos = read_message(data, pos)
            out.append(TraceRecord(time, sender, receiver, body))
        return out


def event_record(time: int, subject: Address, ev: SystemEvent) -> TraceRecord:
    return TraceRecord(time, SYSTEM, subject, ev)
